use vadb::cli;

fn main() {
    if let Ok(raw) = std::env::var("VADB_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring VADB_THREADS={raw:?}; expected a positive integer"),
        }
    }
    std::process::exit(cli::run());
}
