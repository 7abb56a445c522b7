use chrono::{Days, NaiveDate};

/// Dates `start + k·frequency_days` (k ≥ 0) falling inside `[from, to]`.
pub fn occurrences(start: NaiveDate, frequency_days: u32, from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    if frequency_days == 0 || to < from || to < start {
        return Vec::new();
    }
    let freq = i64::from(frequency_days);
    let behind = (from - start).num_days();
    // First k whose date is on or after `from`.
    let k0 = if behind <= 0 { 0 } else { (behind + freq - 1) / freq };
    let mut out = Vec::new();
    let mut k = k0;
    while let Some(date) = start.checked_add_days(Days::new((k * freq) as u64)) {
        if date > to {
            break;
        }
        out.push(date);
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn leap_year_fixture() {
        let got = occurrences(d("2024-01-01"), 30, d("2024-01-01"), d("2024-03-31"));
        assert_eq!(got, vec![d("2024-01-01"), d("2024-01-31"), d("2024-03-01"), d("2024-03-31")]);
    }

    #[test]
    fn horizon_before_start_is_empty() {
        assert!(occurrences(d("2024-06-01"), 7, d("2024-01-01"), d("2024-05-31")).is_empty());
    }

    #[test]
    fn horizon_starting_mid_cycle() {
        let got = occurrences(d("2024-01-01"), 10, d("2024-01-05"), d("2024-01-25"));
        assert_eq!(got, vec![d("2024-01-11"), d("2024-01-21")]);
    }
}
