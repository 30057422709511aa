//! Regenerates the bundled design library.
//!
//! cargo run --release -p proxyid-core --example make_designs -- <dir> [t_min t_max | t1,t2,...]

use std::path::PathBuf;
use std::time::Instant;

use proxyid::design::{default_size_for_degree, generate_design_with, library_file_name, GenerateOptions};
use proxyid::sampling::SeededRng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = PathBuf::from(args.get(1).map_or("designs", String::as_str));
    let degrees: Vec<usize> = match (args.get(2), args.get(3)) {
        (Some(list), None) if list.contains(',') => list.split(',').map(|t| t.parse().expect("degree")).collect(),
        (lo, hi) => {
            let lo = lo.and_then(|s| s.parse().ok()).unwrap_or(2);
            let hi = hi.and_then(|s| s.parse().ok()).unwrap_or(76);
            (lo..=hi).filter(|t| t % 2 == 0).collect()
        }
    };
    std::fs::create_dir_all(&dir).expect("create output dir");
    for t in degrees {
        let n = default_size_for_degree(t);
        let path = dir.join(library_file_name(t, n));
        if path.exists() {
            continue;
        }
        let start = Instant::now();
        let opts = GenerateOptions { max_iters: 400, tolerance: 1e-13, ..GenerateOptions::default() };
        let mut attempt = 0u64;
        loop {
            let mut rng = SeededRng::new(1000 * t as u64 + attempt);
            let res = generate_design_with(t, n, &mut rng, &opts, |p| {
                if p.iteration % 10 == 0 {
                    eprintln!("t={t} it={} max={:.3e} mu={:.2e}", p.iteration, p.max_defect, p.damping);
                }
            });
            match res {
                Ok(d) => {
                    d.write(&path).expect("write design");
                    println!("t={t} N={n} residual={:.2e} {:?} {:.1}s", d.residual(), d.source(), start.elapsed().as_secs_f64());
                    break;
                }
                Err(e) => {
                    eprintln!("t={t} attempt {attempt}: {e}");
                    attempt += 1;
                    if attempt == 5 {
                        break;
                    }
                }
            }
        }
    }
}
