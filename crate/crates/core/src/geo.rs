//! Spherical-earth helpers.

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Point reached by travelling `distance_m` from (lat, lon) on `bearing_rad`
/// (0 = north, clockwise). Result latitude is bounded to [-90, 90] and
/// longitude normalized to [-180, 180).
pub fn destination(lat: f64, lon: f64, distance_m: f64, bearing_rad: f64) -> (f64, f64) {
    if distance_m == 0.0 {
        return (lat, lon);
    }
    let delta = distance_m / EARTH_RADIUS_M;
    let p1 = lat.to_radians();
    let l1 = lon.to_radians();
    let p2 = (p1.sin() * delta.cos() + p1.cos() * delta.sin() * bearing_rad.cos()).asin();
    let l2 = l1
        + (bearing_rad.sin() * delta.sin() * p1.cos()).atan2(delta.cos() - p1.sin() * p2.sin());
    let lat2 = p2.to_degrees().clamp(-90.0, 90.0);
    let lon2 = (l2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    (lat2, lon2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_degree_of_latitude() {
        let d = haversine_m(0.0, 0.0, 1.0, 0.0);
        assert_relative_eq!(d, EARTH_RADIUS_M * std::f64::consts::PI / 180.0, max_relative = 1e-12);
    }

    #[test]
    fn destination_round_trips_distance() {
        for bearing in [0.0, 0.7, 2.0, 4.5] {
            let (lat, lon) = destination(40.7, -74.0, 200.0, bearing);
            assert_relative_eq!(haversine_m(40.7, -74.0, lat, lon), 200.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_distance_is_identity() {
        assert_eq!(destination(12.5, 33.25, 0.0, 1.0), (12.5, 33.25));
    }
}
