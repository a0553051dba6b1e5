use taintlab_learners::{confusion, metrics};

/// Every (y_true, y_pred) pair of binary vectors up to length 12, checked
/// against direct pair counting.
#[test]
fn metrics_match_brute_force() {
    for len in 1..=12u32 {
        let mut y_true = vec![0usize; len as usize];
        let mut y_pred = vec![0usize; len as usize];
        for t in 0u32..(1 << len) {
            for (i, v) in y_true.iter_mut().enumerate() {
                *v = ((t >> i) & 1) as usize;
            }
            for p in 0u32..(1 << len) {
                for (i, v) in y_pred.iter_mut().enumerate() {
                    *v = ((p >> i) & 1) as usize;
                }
                let tp = (t & p).count_ones() as f64;
                let fp = (!t & p).count_ones() as f64;
                let fn_ = (t & !p).count_ones() as f64;
                let correct = (len - (t ^ p).count_ones()) as f64;
                let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
                let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };

                let cm = confusion(&y_true, &y_pred).unwrap();
                assert_eq!(cm.total(), len as usize);
                let m = metrics(&cm);
                assert_eq!(m.accuracy, correct / len as f64);
                assert_eq!(m.precision, precision);
                assert_eq!(m.recall, recall);
                assert!((m.f1 - f1).abs() < 1e-12, "t={t:b} p={p:b}");
            }
        }
    }
}
