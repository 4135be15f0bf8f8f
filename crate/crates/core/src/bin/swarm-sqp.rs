fn main() {
    std::process::exit(swarm_sqp::cli::run(std::env::args_os()));
}
