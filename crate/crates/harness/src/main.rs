fn main() {
    std::process::exit(braess_harness::run_cli(std::env::args_os()));
}
