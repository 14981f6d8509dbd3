fn main() {
    std::process::exit(fftune_cli::run(std::env::args_os()));
}
