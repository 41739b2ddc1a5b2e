fn main() {
    std::process::exit(magnon_cli::run(std::env::args_os()));
}
