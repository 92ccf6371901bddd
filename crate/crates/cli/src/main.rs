fn main() {
    std::process::exit(gnet_cli::run(std::env::args_os()));
}
