use clap::Parser;

fn main() {
    let config = nonlattice::cli::RunConfig::parse();
    if let Err(e) = nonlattice::cli::run(config) {
        // a closed stdout (e.g. piping into `head`) is not an error
        if let nonlattice::Error::Io(ref io) = e {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
