//! Reference error tables for the manufactured cases, used as targets by
//! the convergence checks.

/// One column of a reference table: errors at successive mesh widths and
/// the rates listed alongside (the first rate is absent).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSeries {
    pub field: &'static str,
    pub k: usize,
    pub h: &'static [f64],
    pub errors: &'static [f64],
    pub rates: &'static [f64],
}

impl ReferenceSeries {
    /// Reference error at mesh width `h`, if listed.
    pub fn error_at(&self, h: f64) -> Option<f64> {
        self.h
            .iter()
            .position(|&x| (x - h).abs() <= 1e-9 * x)
            .map(|i| self.errors[i])
    }

    /// Reference rate between `h` and the previous (coarser) width.
    pub fn rate_at(&self, h: f64) -> Option<f64> {
        let i = self.h.iter().position(|&x| (x - h).abs() <= 1e-9 * x)?;
        if i == 0 {
            None
        } else {
            self.rates.get(i - 1).copied()
        }
    }
}

const H3: &[f64] = &[0.1, 0.05, 0.025];
const H4: &[f64] = &[0.2, 0.1, 0.05, 0.025];

const fn series(
    field: &'static str,
    k: usize,
    h: &'static [f64],
    errors: &'static [f64],
    rates: &'static [f64],
) -> ReferenceSeries {
    ReferenceSeries {
        field,
        k,
        h,
        errors,
        rates,
    }
}

/// Elliptic pressure case: `p` and `u` for `k = 0, 1, 2`.
pub const PRESSURE: [ReferenceSeries; 6] = [
    series(
        "p",
        0,
        H3,
        &[4.6542e-2, 2.2510e-2, 1.1134e-2],
        &[1.0480, 1.0156],
    ),
    series(
        "p",
        1,
        H3,
        &[2.5513e-3, 5.6873e-4, 1.3741e-4],
        &[2.1654, 2.0493],
    ),
    series(
        "p",
        2,
        H3,
        &[7.9528e-5, 8.5868e-6, 1.0838e-6],
        &[3.2113, 2.9860],
    ),
    series(
        "u",
        0,
        H3,
        &[2.0567e-1, 1.0093e-1, 5.0553e-2],
        &[1.0270, 0.9975],
    ),
    series(
        "u",
        1,
        H3,
        &[7.4518e-3, 1.7083e-3, 4.2955e-4],
        &[2.1250, 1.9917],
    ),
    series(
        "u",
        2,
        H3,
        &[2.6019e-4, 2.7213e-5, 3.2133e-6],
        &[3.2572, 3.0822],
    ),
];

/// Convection-diffusion case with `D = 1`.
pub const CONCENTRATION_D1: [ReferenceSeries; 4] = [
    series(
        "c",
        0,
        H3,
        &[5.1558e-2, 2.5285e-2, 1.2653e-2],
        &[1.0279, 0.9988],
    ),
    series(
        "c",
        1,
        H3,
        &[3.2333e-3, 7.1038e-4, 1.7401e-4],
        &[2.1864, 2.0294],
    ),
    series(
        "sigma",
        0,
        H3,
        &[2.6777e-1, 1.3206e-1, 6.5342e-2],
        &[1.0198, 1.0151],
    ),
    series(
        "sigma",
        1,
        H3,
        &[1.3469e-2, 3.2289e-3, 7.8314e-4],
        &[2.0605, 2.0437],
    ),
];

/// Convection-diffusion case with `D = 0.01`.
pub const CONCENTRATION_D001: [ReferenceSeries; 4] = [
    series(
        "c",
        0,
        H3,
        &[6.0094e-2, 2.9210e-2, 1.4549e-2],
        &[1.0407, 1.0055],
    ),
    series(
        "c",
        1,
        H3,
        &[3.3389e-3, 7.2005e-4, 1.8901e-4],
        &[2.2132, 1.9296],
    ),
    series(
        "sigma",
        0,
        H3,
        &[9.4209e-3, 5.9263e-3, 3.3895e-3],
        &[0.6687, 0.8061],
    ),
    series(
        "sigma",
        1,
        H3,
        &[7.8256e-4, 2.2495e-4, 6.2568e-5],
        &[1.7986, 1.8461],
    ),
];

/// Coupled case, `k = 1`.
pub const COUPLED: [ReferenceSeries; 4] = [
    series(
        "p",
        1,
        H4,
        &[2.0301e-2, 5.0597e-3, 1.2981e-3, 3.2826e-4],
        &[2.0044, 1.9626, 1.9835],
    ),
    series(
        "u",
        1,
        H4,
        &[1.7355e-1, 4.5963e-2, 1.1166e-2, 2.9251e-3],
        &[1.9168, 1.9792, 1.9947],
    ),
    series(
        "phi",
        1,
        H4,
        &[1.7380e-3, 4.4233e-4, 9.0000e-5, 2.3221e-5],
        &[2.0342, 2.0997, 1.9835],
    ),
    series(
        "c",
        1,
        H4,
        &[1.9424e-4, 5.3631e-5, 1.3846e-5, 3.5442e-6],
        &[1.8567, 1.9536, 1.9659],
    ),
];

/// Tables for a manufactured case by name; `diffusion` picks between the
/// two convection-diffusion tables.
pub fn reference_table(case: &str, diffusion: f64) -> Option<&'static [ReferenceSeries]> {
    match case {
        "pressure_elliptic" => Some(&PRESSURE),
        "concentration_cd" if diffusion == 1.0 => Some(&CONCENTRATION_D1),
        "concentration_cd" if diffusion == 0.01 => Some(&CONCENTRATION_D001),
        "coupled" => Some(&COUPLED),
        _ => None,
    }
}

/// Series for `(field, k)` within a table.
pub fn find_series(
    table: &'static [ReferenceSeries],
    field: &str,
    k: usize,
) -> Option<&'static ReferenceSeries> {
    table.iter().find(|s| s.field == field && s.k == k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::observed_order;

    #[test]
    fn listed_rates_follow_from_listed_errors() {
        for table in [
            &PRESSURE[..],
            &CONCENTRATION_D1,
            &CONCENTRATION_D001,
            &COUPLED,
        ] {
            for s in table {
                assert_eq!(s.errors.len(), s.h.len());
                assert_eq!(s.rates.len() + 1, s.h.len());
                for i in 1..s.h.len() {
                    let r =
                        observed_order(s.errors[i - 1], s.errors[i], s.h[i - 1], s.h[i]).unwrap();
                    // The tables round to four digits and carry a
                    // few typos; the coupled phi column is the loosest.
                    assert!(
                        (r - s.rates[i - 1]).abs() < 0.35,
                        "{} k={} {r}",
                        s.field,
                        s.k
                    );
                }
            }
        }
    }

    #[test]
    fn lookup_by_width() {
        let s = find_series(&PRESSURE, "p", 1).unwrap();
        assert_eq!(s.error_at(0.05), Some(5.6873e-4));
        assert_eq!(s.rate_at(0.05), Some(2.1654));
        assert_eq!(s.rate_at(0.1), None);
        assert!(reference_table("concentration_cd", 0.5).is_none());
    }
}
