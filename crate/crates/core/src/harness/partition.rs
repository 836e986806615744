//! Label-skewed client data and the matching fading profile.
//!
//! Clients come in pairs: clients `2j` and `2j + 1` (zero-based) both hold
//! only digit `j` and share the same large-scale fading coefficient.

use crate::channel::FadingProfile;
use crate::learning::Dataset;
use crate::{Error, Result};

/// Digits used by `clients` paired clients: `0, 1, ..., clients/2 − 1`.
pub fn digits_for(clients: usize) -> Result<Vec<u8>> {
    if clients == 0 || clients % 2 == 1 {
        return Err(Error::invalid(format!("paired partition needs an even client count, got {clients}")));
    }
    if clients / 2 > 10 {
        return Err(Error::invalid(format!("{clients} clients need more than ten digits")));
    }
    Ok((0..(clients / 2) as u8).collect())
}

/// Splits `train` into `clients` single-digit shards of equal size.
///
/// Every digit is truncated to the smallest per-digit count among the digits
/// in use (rounded down to even) and then halved between its two clients, in
/// the original sample order.
pub fn partition_heterogeneous(train: &Dataset, clients: usize) -> Result<Vec<Dataset>> {
    let digits = digits_for(clients)?;
    let by_digit: Vec<Vec<usize>> = digits
        .iter()
        .map(|&d| (0..train.len()).filter(|&i| train.labels[i] == d).collect())
        .collect();
    let per_digit = by_digit.iter().map(Vec::len).min().unwrap_or(0) / 2 * 2;
    if per_digit == 0 {
        return Err(Error::invalid("some digit has fewer than two training samples"));
    }
    let half = per_digit / 2;
    let mut shards = Vec::with_capacity(clients);
    for idx in &by_digit {
        shards.push(train.subset(&idx[..half]));
        shards.push(train.subset(&idx[half..per_digit]));
    }
    Ok(shards)
}

/// `K/2` values equispaced in dB between `low_db` and `high_db`, each given to
/// both clients of a pair. A single pair gets `low_db`.
pub fn beta_profile_paired(clients: usize, low_db: f64, high_db: f64) -> Result<FadingProfile> {
    digits_for(clients)?;
    let pairs = clients / 2;
    let db: Vec<f64> = (0..pairs)
        .flat_map(|j| {
            let v = if pairs == 1 {
                low_db
            } else {
                low_db + (high_db - low_db) * j as f64 / (pairs - 1) as f64
            };
            [v, v]
        })
        .collect();
    FadingProfile::from_db(&db)
}

/// Pairs equispaced between −40 dB and 0 dB.
pub fn beta_profile_paper(clients: usize) -> Result<FadingProfile> {
    beta_profile_paired(clients, -40.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn twenty_clients_one_digit_each() {
        let train = Dataset::synthetic(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9], 7, &mut seeded(1));
        let shards = partition_heterogeneous(&train, 20).unwrap();
        assert_eq!(shards.len(), 20);
        for (k, s) in shards.iter().enumerate() {
            assert_eq!(s.len(), 3);
            assert!(s.labels.iter().all(|&l| l as usize == k / 2));
        }
    }

    #[test]
    fn shards_equal_size_after_truncation() {
        let mut train = Dataset::synthetic(&[0], 9, &mut seeded(2));
        let more = Dataset::synthetic(&[1], 4, &mut seeded(3));
        train.images.extend(more.images);
        train.labels.extend(more.labels);
        let shards = partition_heterogeneous(&train, 4).unwrap();
        assert!(shards.iter().all(|s| s.len() == 2));
    }

    #[test]
    fn two_clients_share_one_digit() {
        let train = Dataset::synthetic(&[0, 1], 4, &mut seeded(4));
        let shards = partition_heterogeneous(&train, 2).unwrap();
        assert!(shards.iter().all(|s| s.labels.iter().all(|&l| l == 0)));
        // the two halves are disjoint
        assert_ne!(shards[0].images, shards[1].images);
    }

    #[test]
    fn odd_client_count_rejected() {
        let train = Dataset::synthetic(&[0, 1], 4, &mut seeded(5));
        assert!(partition_heterogeneous(&train, 3).is_err());
        assert!(beta_profile_paper(5).is_err());
    }

    #[test]
    fn paper_profile_endpoints() {
        let p = beta_profile_paper(20).unwrap();
        assert!((p.beta(0) - 1e-4).abs() < 1e-18 && p.beta(0) == p.beta(1));
        assert!((p.beta(18) - 1.0).abs() < 1e-15 && p.beta(18) == p.beta(19));
        let db: Vec<f64> = p.betas().iter().map(|b| 10.0 * b.log10()).collect();
        for j in 1..10 {
            assert!((db[2 * j] - db[2 * j - 2] - 40.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn small_profiles() {
        let p = beta_profile_paper(4).unwrap();
        assert!((p.betas()[0] - 1e-4).abs() < 1e-18);
        assert_eq!(p.betas()[2], 1.0);
        let p = beta_profile_paper(2).unwrap();
        assert!(p.betas().iter().all(|b| (b - 1e-4).abs() < 1e-18));
    }
}
