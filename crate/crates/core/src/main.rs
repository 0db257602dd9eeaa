fn main() {
    std::process::exit(speedscale::harness::run_command(std::env::args_os()));
}
