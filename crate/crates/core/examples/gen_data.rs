//! Generate a small synthetic payment dataset, write it as CSV and read it back.

use hyfl::data::{generate, read_dataset, write_dataset, GenConfig};

fn main() -> hyfl::Result<()> {
    let cfg = GenConfig {
        n_train: 5_000,
        n_accounts: 1_000,
        seed: 7,
        ..Default::default()
    };
    let ds = generate(&cfg)?;
    let positives = ds.labels(&ds.train).iter().filter(|&&y| y == 1).count();
    let high_risk = ds.accounts.values().filter(|a| a.flag.is_high_risk()).count();
    println!(
        "{} train / {} test transactions, {positives} crimes in train, {} accounts ({high_risk} high-risk)",
        ds.train.len(),
        ds.test.len(),
        ds.accounts.len()
    );

    let dir = std::env::temp_dir().join("hyfl-gen-data");
    write_dataset(&ds, &dir)?;
    let back = read_dataset(&dir)?;
    assert_eq!(back.transactions.len(), ds.transactions.len());
    println!("wrote and re-read {}", dir.display());
    Ok(())
}
