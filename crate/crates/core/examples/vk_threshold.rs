//! Scans the VK slope of the ground-state mass for several nonlinearity
//! powers and locates the sign change for mu > 2.

use star_nls::spectral::{find_omega_star, ground_mass, vk_derivative};
use star_nls::stationary::existence_threshold;

fn main() -> star_nls::Result<()> {
    let (alpha, n) = (-1.0, 3);
    let floor = existence_threshold(alpha, n);
    for mu in [1.0, 2.0, 2.5, 3.0, 4.0] {
        let samples: Vec<(f64, f64)> = (1..=8)
            .map(|i| floor * (1.0 + 0.5 * 2f64.powi(i)))
            .map(|w| vk_derivative(alpha, w, mu, n).map(|d| (w, d)))
            .collect::<star_nls::Result<_>>()?;
        print!("mu = {mu}:");
        for (w, d) in &samples {
            print!(" {w:.3}:{}", if *d > 0.0 { '+' } else { '-' });
        }
        println!();
        if mu > 2.0 {
            let star = find_omega_star(alpha, mu, n, 1e-10)?;
            println!("  omega* = {star:.10}, mass there = {:.6}", ground_mass(alpha, star, mu, n)?);
        }
    }
    Ok(())
}
