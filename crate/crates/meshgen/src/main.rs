//! Writes members of the built-in mesh families as WGPM-1 files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wgfem::geometry::Vec2;
use wgfem::mesh_io::write_mesh;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Square,
    TwoSquares,
    Distorted,
    Bricks,
    Disc,
    Interface,
    Random,
}

#[derive(Parser)]
#[command(about = "Write a mesh from one of the built-in families")]
struct Args {
    family: Family,
    /// Cells per side, slices or angular parameter; the seed for `random`.
    #[arg(short, default_value_t = 4)]
    n: usize,
    /// Vertex displacement amplitude for `distorted`.
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
    /// Interface radius for `interface`.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mesh = match args.family {
        Family::Square => wgfem_meshgen::square_grid(args.n),
        Family::TwoSquares => wgfem_meshgen::two_squares(),
        Family::Distorted => wgfem_meshgen::distorted_quads(args.n, args.amplitude),
        Family::Bricks => wgfem_meshgen::bricks(args.n),
        Family::Disc => wgfem_meshgen::disc(args.n),
        Family::Interface => wgfem_meshgen::interface_ogrid(args.n, args.radius),
        Family::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.n as u64);
            wgfem_meshgen::random_element(&mut rng, 0.5, 1.0, Vec2::zeros())
        }
    };
    match write_mesh(&mesh, &args.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}
