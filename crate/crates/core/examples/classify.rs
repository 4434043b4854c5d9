use angle_rigidity::{classify, point, AngleTriplet, Angularity};

fn main() -> angle_rigidity::Result<()> {
    // unit equilateral triangle, two signed corner angles (0-based indices)
    let positions = vec![point(0.0, 0.0), point(0.5, 0.75f64.sqrt()), point(1.0, 0.0)];
    let angles = vec![AngleTriplet::new(2, 0, 1), AngleTriplet::new(0, 1, 2)];
    let a = Angularity::new(positions, angles)?.with_realized_targets()?;
    let report = classify(&a)?;
    println!(
        "rank {} of {}, minimally rigid: {}",
        report.rank, report.max_rank, report.minimally_rigid
    );
    Ok(())
}
