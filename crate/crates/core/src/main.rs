fn main() {
    std::process::exit(agentfuse::cli::run(std::env::args_os()));
}
