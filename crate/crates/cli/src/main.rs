//! Binary entry point; behavior lives in the library so the test
//! suites can drive the full command surface in-process.

fn main() {
    std::process::exit(hjreg_cli::run(std::env::args()));
}
