use qradon::tomography::{radon_forward, Grid2D, PolarSpectrum, SliceTheoremCheck};

fn main() {
    for sigma in [0.08f64, 0.10, 0.125, 0.15] {
        let mut line = format!("sigma={sigma:.3}:");
        for n in [128usize, 256, 512] {
            let grid = Grid2D::gaussian_phantom(n, 1.0, sigma).unwrap();
            let sino = radon_forward(&grid, 16, n).unwrap();
            let dc = PolarSpectrum::from_sinogram(&sino).value(0, 0).norm();
            let checker = SliceTheoremCheck::new(&grid, sino);
            let mut worst = 0.0f64;
            for j in 0..16 {
                for f in 0..32 {
                    let (_, _, err) = checker.check(j, f);
                    worst = worst.max(err / dc);
                }
            }
            line.push_str(&format!("  n{n}={worst:.3e}"));
        }
        println!("{line}");
    }
}
