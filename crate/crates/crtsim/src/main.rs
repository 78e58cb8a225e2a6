use clap::Parser;

fn main() {
    env_logger::init();
    let cli = crtsim::cli::Cli::parse();
    if let Err(e) = crtsim::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(crtsim::cli::exit_code(&e));
    }
}
