fn main() {
    std::process::exit(shaken_lattice::cli::dispatch(std::env::args_os()));
}
