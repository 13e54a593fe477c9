//! Deployment geometry: base stations, the claimant region, and the
//! conversion of planar locations into noiseless ToA vectors.
//!
//! Units are fixed crate-wide: meters for space, nanoseconds for time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Speed of light in meters per nanosecond.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseStation {
    /// 1-based index in the scenario's ordering.
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationRole {
    Claimed,
    True,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub role: LocationRole,
}

impl Location {
    pub fn claimed(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            role: LocationRole::Claimed,
        }
    }

    pub fn true_position(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            role: LocationRole::True,
        }
    }
}

/// Axis-aligned rectangle. May be degenerate (zero width or height); the
/// scenario itself requires a positive-area claimant region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Region {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        if ![xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("region bounds must be finite".into()));
        }
        if xmin > xmax || ymin > ymax {
            return Err(Error::InvalidParameter(format!(
                "region bounds out of order: [{xmin}, {ymin}, {xmax}, {ymax}]"
            )));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.xmin..=self.xmax).contains(&x) && (self.ymin..=self.ymax).contains(&y)
    }

    /// Uniform point in the rectangle; x is drawn before y.
    pub fn sample(&self, rng: &mut RngStream) -> (f64, f64) {
        let x = rng.uniform_in(self.xmin, self.xmax);
        let y = rng.uniform_in(self.ymin, self.ymax);
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDoc", into = "ScenarioDoc")]
pub struct Scenario {
    base_stations: Vec<BaseStation>,
    region: Region,
}

/// Flat JSON form: `{"bs": [[x,y],...], "region": [xmin,ymin,xmax,ymax]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioDoc {
    bs: Vec<[f64; 2]>,
    region: [f64; 4],
}

impl TryFrom<ScenarioDoc> for Scenario {
    type Error = Error;

    fn try_from(doc: ScenarioDoc) -> Result<Self> {
        let [xmin, ymin, xmax, ymax] = doc.region;
        Scenario::new(&doc.bs, Region::new(xmin, ymin, xmax, ymax)?)
    }
}

impl From<Scenario> for ScenarioDoc {
    fn from(s: Scenario) -> Self {
        let r = s.region;
        ScenarioDoc {
            bs: s.base_stations.iter().map(|b| [b.x, b.y]).collect(),
            region: [r.xmin, r.ymin, r.xmax, r.ymax],
        }
    }
}

impl Scenario {
    pub fn new(positions: &[[f64; 2]], region: Region) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 base stations, got {}",
                positions.len()
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("base station coordinates must be finite".into()));
        }
        for (i, a) in positions.iter().enumerate() {
            if positions[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate base station position ({}, {})",
                    a[0], a[1]
                )));
            }
        }
        if region.area() <= 0.0 {
            return Err(Error::InvalidParameter("claimant region must have positive area".into()));
        }
        let (bx0, by0, bx1, by1) = positions.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1])),
        );
        if region.xmin < bx0 || region.ymin < by0 || region.xmax > bx1 || region.ymax > by1 {
            return Err(Error::InvalidParameter(
                "claimant region must lie within the base-station bounding box".into(),
            ));
        }
        let base_stations = positions
            .iter()
            .enumerate()
            .map(|(i, p)| BaseStation {
                id: i + 1,
                x: p[0],
                y: p[1],
            })
            .collect();
        Ok(Self {
            base_stations,
            region,
        })
    }

    /// Four base stations on the corners of a 1000 m × 500 m area, claimant
    /// region the central 500 m × 500 m square.
    pub fn four_corners() -> Self {
        Self::new(&CORNERS, default_region()).expect("preset is valid")
    }

    /// The four corners plus the midpoints of the two long edges.
    pub fn six_stations() -> Self {
        let mut p = CORNERS.to_vec();
        p.extend([[500.0, 0.0], [500.0, 500.0]]);
        Self::new(&p, default_region()).expect("preset is valid")
    }

    pub fn base_stations(&self) -> &[BaseStation] {
        &self.base_stations
    }

    pub fn n_bs(&self) -> usize {
        self.base_stations.len()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn speed_of_light(&self) -> f64 {
        SPEED_OF_LIGHT_M_PER_NS
    }
}

const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1000.0, 0.0], [0.0, 500.0], [1000.0, 500.0]];

fn default_region() -> Region {
    Region::new(250.0, 0.0, 750.0, 500.0).expect("preset is valid")
}

pub fn distance(loc: &Location, bs: &BaseStation) -> f64 {
    (loc.x - bs.x).hypot(loc.y - bs.y)
}

/// Noiseless ToA from `claimed` to every base station, in BS order.
pub fn claimed_toa_vector(scenario: &Scenario, claimed: &Location) -> Vec<f64> {
    scenario
        .base_stations
        .iter()
        .map(|bs| distance(claimed, bs) / SPEED_OF_LIGHT_M_PER_NS)
        .collect()
}

/// Mean observation vector of a far-field spoofer claiming `claimed`: every
/// entry equals the mean of the claimed ToA vector.
pub fn attacker_mean_vector(scenario: &Scenario, claimed: &Location) -> Vec<f64> {
    attacker_mean_from_toa(&claimed_toa_vector(scenario, claimed))
}

/// As [`attacker_mean_vector`], starting from an already computed ToA vector.
pub fn attacker_mean_from_toa(toa: &[f64]) -> Vec<f64> {
    vec![mean(toa); toa.len()]
}

/// Arithmetic mean, accumulated relative to the first entry so that a
/// constant vector returns that constant exactly.
pub fn mean(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else {
        return f64::NAN;
    };
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

pub fn sample_claimed_location(scenario: &Scenario, rng: &mut RngStream) -> Location {
    let (x, y) = scenario.region.sample(rng);
    Location::claimed(x, y)
}

/// Observation mean of a spoofer actually at `true_loc` that adds the timing
/// offset `time_offset_ns` to every transmission: `W_i + T_x`.
#[cfg(test)]
pub(crate) fn spoofer_mean_from_true_location(
    scenario: &Scenario,
    true_loc: &Location,
    time_offset_ns: f64,
) -> Vec<f64> {
    scenario
        .base_stations
        .iter()
        .map(|bs| distance(true_loc, bs) / SPEED_OF_LIGHT_M_PER_NS + time_offset_ns)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corners_bs() -> Vec<BaseStation> {
        Scenario::four_corners().base_stations().to_vec()
    }

    #[test]
    fn distance_examples() {
        let origin = BaseStation { id: 1, x: 0.0, y: 0.0 };
        assert_eq!(distance(&Location::claimed(0.0, 0.0), &origin), 0.0);

        let far = BaseStation { id: 4, x: 1000.0, y: 500.0 };
        let d = distance(&Location::claimed(250.0, 125.0), &far);
        assert!((d - 838.525).abs() < 1e-3, "{d}");

        for bs in corners_bs() {
            let d = distance(&Location::claimed(500.0, 250.0), &bs);
            assert!((d - 559.017).abs() < 1e-3);
        }
    }

    #[test]
    fn claimed_toa_examples() {
        let s = Scenario::four_corners();
        let u = claimed_toa_vector(&s, &Location::claimed(250.0, 125.0));
        let expected = [932.34, 2536.23, 1503.35, 2797.02];
        for (a, b) in u.iter().zip(expected) {
            assert!((a - b).abs() < 0.01, "{u:?}");
        }

        let at_bs = claimed_toa_vector(&s, &Location::claimed(1000.0, 0.0));
        assert_eq!(at_bs[1], 0.0);

        let center = claimed_toa_vector(&s, &Location::claimed(500.0, 250.0));
        assert!(center.iter().all(|&t| t == center[0]));
        assert!((center[0] - 1864.68).abs() < 0.01);
    }

    #[test]
    fn attacker_mean_examples() {
        let s = Scenario::four_corners();
        let v = attacker_mean_vector(&s, &Location::claimed(250.0, 125.0));
        assert!(v.iter().all(|&t| (t - 1942.24).abs() < 0.01), "{v:?}");

        let claimed = Location::claimed(500.0, 250.0);
        assert_eq!(attacker_mean_vector(&s, &claimed), claimed_toa_vector(&s, &claimed));

        assert_eq!(attacker_mean_from_toa(&[100.0, 300.0]), vec![200.0, 200.0]);
    }

    #[test]
    fn far_field_spoofer_approaches_constant_mean() {
        // A spoofer far away with a calibrated offset reproduces mean(U) at
        // every station up to a vanishing geometric spread.
        let s = Scenario::four_corners();
        let claimed = Location::claimed(300.0, 400.0);
        let target = attacker_mean_vector(&s, &claimed)[0];
        let far = Location::true_position(500.0 + 1.0e9, 250.0);
        let w = spoofer_mean_from_true_location(&s, &far, 0.0);
        let offset = target - mean(&w);
        let v = spoofer_mean_from_true_location(&s, &far, offset);
        let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min);
        // 1000 m baseline seen from 1e9 m: ToA spread is the x-extent / c.
        assert!((spread - 1000.0 / SPEED_OF_LIGHT_M_PER_NS).abs() < 1e-3);
        assert!((mean(&v) - target).abs() < 1e-3);
    }

    #[test]
    fn degenerate_region_samples_the_point() {
        let r = Region::new(300.0, 200.0, 300.0, 200.0).unwrap();
        let mut rng = RngStream::new(5);
        for _ in 0..100 {
            assert_eq!(r.sample(&mut rng), (300.0, 200.0));
        }
    }

    #[test]
    fn sampled_locations_have_expected_mean() {
        let s = Scenario::four_corners();
        let mut rng = RngStream::new(11);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let loc = sample_claimed_location(&s, &mut rng);
            assert!(s.region().contains(loc.x, loc.y));
            sx += loc.x;
            sy += loc.y;
        }
        assert!((sx / n as f64 - 500.0).abs() < 5.0);
        assert!((sy / n as f64 - 250.0).abs() < 2.5);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = Scenario::six_stations();
        let draw = |seed| {
            let mut rng = RngStream::new(seed);
            (0..20)
                .map(|_| {
                    let l = sample_claimed_location(&s, &mut rng);
                    (l.x, l.y)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn rejects_invalid_layouts() {
        let region = default_region();
        assert!(Scenario::new(&[[0.0, 0.0]], region).is_err());
        assert!(Scenario::new(&[[0.0, 0.0], [0.0, 0.0], [1000.0, 500.0]], region).is_err());
        assert!(Scenario::new(&[[0.0, 0.0], [f64::NAN, 1.0]], region).is_err());
        let flat = Region::new(300.0, 0.0, 300.0, 500.0).unwrap();
        assert!(Scenario::new(&CORNERS, flat).is_err());
        let outside = Region::new(-10.0, 0.0, 100.0, 100.0).unwrap();
        assert!(Scenario::new(&CORNERS, outside).is_err());
        assert!(Region::new(10.0, 0.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn json_form() {
        let s = Scenario::four_corners();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"bs":[[0.0,0.0],[1000.0,0.0],[0.0,500.0],[1000.0,500.0]],"region":[250.0,0.0,750.0,500.0]}"#
        );
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"bs":[[0,0]],"region":[0,0,1,1]}"#;
        assert!(serde_json::from_str::<Scenario>(bad).is_err());
    }

    proptest! {
        #[test]
        fn toa_is_translation_covariant(
            dx in -1.0e4..1.0e4f64,
            dy in -1.0e4..1.0e4f64,
            cx in 250.0..750.0f64,
            cy in 0.0..500.0f64,
        ) {
            let s = Scenario::four_corners();
            let shifted: Vec<[f64; 2]> = s.base_stations().iter().map(|b| [b.x + dx, b.y + dy]).collect();
            let r = s.region();
            let region = Region::new(r.xmin + dx, r.ymin + dy, r.xmax + dx, r.ymax + dy).unwrap();
            let t = Scenario::new(&shifted, region).unwrap();
            let u = claimed_toa_vector(&s, &Location::claimed(cx, cy));
            let w = claimed_toa_vector(&t, &Location::claimed(cx + dx, cy + dy));
            for (a, b) in u.iter().zip(&w) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn attacker_mean_is_constant_and_preserves_mean(
            cx in 0.0..1000.0f64,
            cy in 0.0..500.0f64,
        ) {
            let s = Scenario::six_stations();
            let claimed = Location::claimed(cx, cy);
            let u = claimed_toa_vector(&s, &claimed);
            let v = attacker_mean_vector(&s, &claimed);
            prop_assert!(u.iter().all(|&t| t >= 0.0));
            prop_assert!(v.iter().all(|&t| t == v[0]));
            prop_assert!((mean(&v) - mean(&u)).abs() <= 1e-12 * mean(&u));
        }
    }
}
