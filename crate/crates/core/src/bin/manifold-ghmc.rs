fn main() {
    std::process::exit(manifold_ghmc::cli::cli_main(std::env::args_os()));
}
