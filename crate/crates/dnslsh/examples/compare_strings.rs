//! Hash a few DNS labels and compare their digests.
//!
//! The similarity digest maps byte strings onto 256-bit vectors such that
//! similar inputs land close together: the comparison score is 128 minus
//! the Hamming distance between digests, so identical inputs score 128,
//! unrelated inputs hover around 0, and -128 is maximal dissimilarity.
//!
//! Run with: `cargo run --example compare_strings`

use dnslsh::lsh::{compare, digest_query, HashConfig};

fn main() -> dnslsh::Result<()> {
    let config = HashConfig::default();
    config.validate()?;

    // Three subdomains as a tunnel might emit them: two that share most of
    // their payload, and one unrelated.
    let near_a = "a91f3c0b7d2e845516c09aa107bd31ffcampaign01";
    let near_b = "a91f3c0b7d2e845516c09aaXXXbd31ffcampaign02";
    let far = "mail";

    let da = digest_query(near_a, &config);
    let db = digest_query(near_b, &config);
    let dc = digest_query(far, &config);

    println!("hash configuration: {} slots {:?}", config.slot_count(), config.slot_names());
    println!();

    for (name, digests) in [("near_a", &da), ("near_b", &db), ("far", &dc)] {
        println!("{name}: length {} cleaned characters", digests.subdomain_length);
        for (slot, slot_name) in config.slot_names().iter().enumerate() {
            println!("  {slot_name:<9} {}", digests.slots[slot]);
        }
    }
    println!();

    // Per-slot scores. Slot 0 is the digest of the whole subdomain; the
    // remaining slots are equal character segments, so localized edits
    // show up as one low-scoring segment.
    println!("scores (128 = identical, ~0 = unrelated):");
    for (slot, slot_name) in config.slot_names().iter().enumerate() {
        println!(
            "  {slot_name:<9} near_a/near_b {:>4}   near_a/far {:>4}",
            compare(&da.slots[slot], &db.slots[slot]),
            compare(&da.slots[slot], &dc.slots[slot]),
        );
    }

    let self_score = compare(&da.slots[0], &da.slots[0]);
    assert_eq!(self_score, 128, "a digest always scores 128 against itself");
    println!();
    println!("near_a against itself: {self_score}");
    Ok(())
}
