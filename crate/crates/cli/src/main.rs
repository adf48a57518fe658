use boxen_cli::args::{self, Parsed, USAGE};
use boxen_cli::commands;

fn main() {
    // optional cap on the worker pool
    if let Ok(raw) = std::env::var("BOXEN_MAX_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }

    let argv: Vec<String> = std::env::args().skip(1).collect();
    let code = match args::parse(argv) {
        Ok(Parsed::Help) => {
            print!("{USAGE}");
            0
        }
        Ok(Parsed::Run(cmd)) => match commands::run(*cmd) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("run `boxen --help` for usage");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
