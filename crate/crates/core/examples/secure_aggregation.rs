//! Pairwise-masked aggregation: each masked update looks random, yet the
//! masks cancel in the sum. Also seals an embedding for a single recipient.

use hyfl::privacy::{
    mask_update, open_embeddings, seal_embeddings, unmask_sum, Identity, KeyMaterial, Opener, Sealer,
};

fn main() -> hyfl::Result<()> {
    let updates = [vec![0.5, -1.0, 2.0], vec![0.25, 0.0, -1.0], vec![1.0, 3.0, 0.5]];
    let ids: Vec<Identity> = (1..=3).map(|i| Identity::from_seed(format!("ac:{i}"), i)).collect();

    let mut keys = vec![KeyMaterial::default(); ids.len()];
    for (a, me) in ids.iter().enumerate() {
        for (b, peer) in ids.iter().enumerate() {
            if a != b {
                let s = me.agree(peer.name(), &peer.static_public(), &peer.ephemeral_public(), "mask")?;
                keys[a].insert_mask_peer(b as u32 + 1, s);
            }
        }
    }

    let masked = updates
        .iter()
        .enumerate()
        .map(|(i, u)| mask_update(u, i as u32 + 1, &keys[i], 0))
        .collect::<hyfl::Result<Vec<_>>>()?;
    for (i, m) in masked.iter().enumerate() {
        println!("ac:{} sends {:?}", i + 1, m.values);
    }
    let sum = unmask_sum(&masked)?;
    println!("server recovers the sum {sum:.6?}");

    // Sealed embeddings: only the holder of the session key can read them.
    let (tx, ac) = (Identity::from_seed("tx", 10), &ids[0]);
    let k_ac = ac.agree("tx", &tx.static_public(), &tx.ephemeral_public(), "session")?;
    let k_tx = tx.agree(ac.name(), &ac.static_public(), &ac.ephemeral_public(), "session")?;
    let mut sealer = Sealer::new(&k_ac, ac.name());
    let mut opener = Opener::new(&k_tx);
    let ct = seal_embeddings(&[0.1, -0.2, 0.3, 0.4], &mut sealer, b"acct-42")?;
    println!("sealed embedding: {} bytes", ct.len());
    println!("opened: {:?}", open_embeddings(&ct, &mut opener, b"acct-42")?);
    println!("replay rejected: {}", open_embeddings(&ct, &mut opener, b"acct-42").is_err());
    Ok(())
}
