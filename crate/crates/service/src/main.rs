fn main() {
    std::process::exit(sgbot_service::cli::run(std::env::args_os()));
}
