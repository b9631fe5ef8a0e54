fn main() {
    std::process::exit(hopf_biherm::cli::run(std::env::args_os()));
}
