use turbo_aggregate::ff::{prg, FieldElem, FieldVec, Seed};
use turbo_aggregate::lagrange::{interpolate_eval, EvalSet};
use turbo_aggregate::sharing::{default_indices, shamir_reconstruct, shamir_share, ShamirShare};

// Any t - 1 shares are consistent with every candidate secret: the polynomial
// through (0, s') and the observed shares has degree <= t - 1 and completes
// them to a full, valid share set of s'.
#[test]
fn shamir_shares_below_threshold_fit_any_secret() {
    for t in 2..=5usize {
        let n = t + 2;
        let idx = default_indices(n);
        let secret = prg(Seed(t as u64), 3);
        let shares = shamir_share(&secret, t, n, &idx, Seed(100 + t as u64)).unwrap();
        let seen = &shares[..t - 1];
        for c in 0..25u64 {
            let candidate = if c == 0 { secret.clone() } else { prg(Seed(1000 * t as u64 + c), 3) };
            let mut known = EvalSet::new();
            known.push(FieldElem::ZERO, candidate.clone());
            for s in seen {
                known.push(s.index, s.value.clone());
            }
            let completed: Vec<ShamirShare> = idx
                .iter()
                .map(|&i| ShamirShare {
                    index: i,
                    value: interpolate_eval(&known, i).unwrap(),
                })
                .collect();
            assert_eq!(&completed[..t - 1], seen);
            // every t-subset of the completed set agrees on s'
            for start in 0..=n - t {
                let window = &completed[start..start + t];
                assert_eq!(shamir_reconstruct(window, t).unwrap(), candidate);
            }
        }
    }
}

#[test]
fn threshold_shares_pin_the_secret() {
    let idx = default_indices(5);
    let secret = FieldVec::from_u64s(&[42, 7]);
    let shares = shamir_share(&secret, 3, 5, &idx, Seed(8)).unwrap();
    assert_eq!(shamir_reconstruct(&[shares[4].clone(), shares[0].clone(), shares[2].clone()], 3).unwrap(), secret);
}
