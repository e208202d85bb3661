fn main() {
    std::process::exit(recon::cli::run(std::env::args_os()));
}
