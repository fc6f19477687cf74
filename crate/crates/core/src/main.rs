fn main() {
    std::process::exit(waveguide_se::cli::run(std::env::args_os()));
}
