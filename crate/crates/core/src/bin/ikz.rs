fn main() {
    std::process::exit(ikz::cli::cli_main(std::env::args_os()));
}
