//! Draw a piecewise-constant signal, a Gaussian measurement operator and a
//! noisy measurement, then inspect the operator spectrum and save everything
//! in the binary array format.

use std::path::PathBuf;

use invstab::io;
use invstab::signals::{generate_operator, generate_signal, measure, SignalSpec};

fn main() -> invstab::Result<()> {
    let spec = SignalSpec::default();
    let u = generate_signal(&spec, 1)?;
    println!("signal: n = {}, {} jumps, total jump variation {:.3}", u.len(), u.jumps.len(), u.jump_variation());
    for j in &u.jumps {
        println!("  jump at {:4} of height {:+.3}", j.index, j.height);
    }

    let a = generate_operator(512, 1024, 0.0, 0.05, 2)?;
    let f = measure(&a, &u, 0.03, 3)?;
    println!(
        "A: {}x{}, ||A||_F^2 = {:.1} (expected m*n*0.05 = {:.1})",
        a.rows(),
        a.cols(),
        a.entries().norm_squared(),
        512.0 * 1024.0 * 0.05
    );
    println!("noise: ||n|| = {:.4} (sqrt(m)*0.03 = {:.4})", f.noise_norm(), (512f64).sqrt() * 0.03);

    let svd = a.svd()?;
    let s = &svd.singular_values;
    println!(
        "singular values: max {:.3}, min {:.3}, condition number {:.3}",
        s.max(),
        s.min(),
        a.condition_number()?
    );

    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/signals".into()));
    std::fs::create_dir_all(&dir).map_err(|e| invstab::Error::io(&dir, e))?;
    io::write_vector(&dir.join("u.bin"), &u.values)?;
    io::write_vector(&dir.join("f.bin"), &f.values)?;
    io::write_matrix(&dir.join("A.bin"), a.entries())?;
    let back = io::read_vector(&dir.join("u.bin"))?;
    assert_eq!(back, u.values);
    println!("wrote u.bin, f.bin, A.bin to {}", dir.display());
    Ok(())
}
