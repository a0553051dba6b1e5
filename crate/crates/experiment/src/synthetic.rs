//! A synthetic stand-in for the public credit-risk table: same columns in the
//! same order, a minority default class and a real signal behind it.

use rand::Rng as _;
use taintlab_core::rng::{rng_from_seed, Rng};
use taintlab_core::tabular::{read_csv_from, Dataset};

pub const TARGET: &str = "loan_status";

pub const COLUMNS: [&str; 12] = [
    "person_age",
    "person_income",
    "person_home_ownership",
    "person_emp_length",
    "loan_intent",
    "loan_grade",
    "loan_amnt",
    "loan_int_rate",
    "loan_status",
    "loan_percent_income",
    "cb_person_default_on_file",
    "cb_person_cred_hist_length",
];

const HOME: [&str; 4] = ["RENT", "MORTGAGE", "OWN", "OTHER"];
const INTENT: [&str; 6] = [
    "EDUCATION",
    "MEDICAL",
    "VENTURE",
    "PERSONAL",
    "DEBTCONSOLIDATION",
    "HOMEIMPROVEMENT",
];
const GRADES: [&str; 7] = ["A", "B", "C", "D", "E", "F", "G"];

fn normal(rng: &mut Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn pick<'a>(rng: &mut Rng, items: &[&'a str], weights: &[f64]) -> &'a str {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (item, w) in items.iter().zip(weights) {
        if x < *w {
            return item;
        }
        x -= w;
    }
    items[items.len() - 1]
}

/// Renders `n` synthetic rows as CSV text.
pub fn credit_like_csv(n: usize, seed: u64) -> String {
    let mut rng = rng_from_seed(seed);
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for _ in 0..n {
        let age = (22.0 + 6.0 * normal(&mut rng).abs() + 4.0 * rng.random::<f64>()).round().min(80.0) as i64;
        let income = ((10.8 + 0.5 * normal(&mut rng)).exp()).round().max(4000.0) as i64;
        let home = pick(&mut rng, &HOME, &[0.5, 0.41, 0.08, 0.01]);
        let emp = (rng.random::<f64>() * (age - 17) as f64 * 0.5).floor() as i64;
        let intent = pick(&mut rng, &INTENT, &[0.2, 0.19, 0.17, 0.17, 0.16, 0.11]);
        let grade = pick(&mut rng, &GRADES, &[0.33, 0.32, 0.2, 0.11, 0.03, 0.007, 0.003]);
        let grade_idx = GRADES.iter().position(|g| *g == grade).expect("known grade");
        let amount = ((8.9 + 0.6 * normal(&mut rng)).exp() / 25.0).round().clamp(20.0, 1400.0) as i64 * 25;
        let rate = ((7.0 + 2.4 * grade_idx as f64 + 0.9 * normal(&mut rng)).max(5.4) * 100.0).round() / 100.0;
        let pct = ((amount as f64 / income as f64) * 100.0).round() / 100.0;
        let prior_default = grade_idx >= 2 && rng.random::<f64>() < 0.35 || rng.random::<f64>() < 0.05;
        let hist = (2.0 + (age - 20).max(0) as f64 * 0.4 * rng.random::<f64>()).round() as i64;

        let score = -3.4 + 0.55 * grade_idx as f64 + 9.0 * pct + if home == "RENT" { 0.9 } else { 0.0 }
            - 0.35 * (income as f64 / 50_000.0)
            + 0.3 * normal(&mut rng);
        let status = u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-2.2 * score).exp()));

        let emp = if rng.random::<f64>() < 0.03 { String::new() } else { emp.to_string() };
        let rate = if rng.random::<f64>() < 0.09 { String::new() } else { format!("{rate:.2}") };
        out.push_str(&format!(
            "{age},{income},{home},{emp},{intent},{},{amount},{rate},{status},{pct:.2},{},{hist}\n",
            GRADES[grade_idx],
            if prior_default { "Y" } else { "N" },
        ));
    }
    out
}

/// `n` synthetic rows with `loan_status` as the target.
pub fn credit_like(n: usize, seed: u64) -> Dataset {
    read_csv_from(credit_like_csv(n, seed).as_bytes(), None, Some(TARGET)).expect("synthetic rows parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use taintlab_core::tabular::{ColumnType, Value};

    #[test]
    fn shape_and_balance() {
        let ds = credit_like(4000, 9);
        assert_eq!(ds.n_rows(), 4000);
        let names: Vec<&str> = ds.schema().names().collect();
        assert_eq!(names, COLUMNS);
        let t = ds.schema().target_index().unwrap();
        let positives = ds.rows().iter().filter(|r| r[t] == Value::Int(1)).count() as f64 / 4000.0;
        assert!((0.15..0.30).contains(&positives), "{positives}");
        let rate = ds.schema().index_of("loan_int_rate").unwrap();
        assert_eq!(ds.schema().column(rate).ty, ColumnType::Float);
        assert!(ds.column_values(rate).any(Value::is_missing));
    }

    #[test]
    fn seeded() {
        assert_eq!(credit_like_csv(50, 3), credit_like_csv(50, 3));
        assert_ne!(credit_like_csv(50, 3), credit_like_csv(50, 4));
    }
}
