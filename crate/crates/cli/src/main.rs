fn main() {
    std::process::exit(mpcx_cli::run(std::env::args_os()));
}
