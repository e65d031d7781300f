fn main() {
    std::process::exit(fdensity_cli::run(std::env::args_os()));
}
