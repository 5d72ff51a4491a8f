use std::process::ExitCode;

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("HETNOISE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("hetnoise: HETNOISE_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let code = hetnoise::cli::run(std::env::args_os());
    ExitCode::from(code as u8)
}
