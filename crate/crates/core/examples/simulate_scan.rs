//! Scans a vehicle shell from the side at 20 m and 40 m and shows how the
//! depth buffer thins the returns with range.
//!
//! `cargo run --release --example simulate_scan -- [resolution_rad]`

use sotracker::synth::{simulate_scan, VehicleTemplate};
use sotracker::{BoxSize, ObjectState, Point, PointCloud};

fn main() -> sotracker::Result<()> {
    let resolution: f64 = std::env::args()
        .nth(1)
        .map_or(0.003, |s| s.parse().expect("resolution in radians"));
    let template = VehicleTemplate::new(BoxSize::new(4.5, 1.8, 1.5)?, 2500.0)?;
    let shape = PointCloud::world(template.shell().iter().map(|s| s.local).collect());
    println!("shape: {} points", shape.len());

    for range in [10.0, 20.0, 40.0] {
        let pose = ObjectState::new(0.0, range, 0.75, 0.2);
        let scan = simulate_scan(&shape, &pose, &Point::new(0.0, 0.0, 1.8), resolution);
        println!("range {range:>4.0} m: {:>6} points", scan.len());
    }
    Ok(())
}
