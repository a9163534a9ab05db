//! Fuzzes the run-configuration parser: arbitrary bytes must either fail
//! with a config error or produce a value that validates, builds, and
//! round-trips through serialization without panicking.

#![no_main]

use catindex::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = RunConfig::from_toml(text) else { return };

    // Domain validation may reject the parse, but must never panic.
    let _ = config.build_model();
    let _ = config.build_payoff();
    let _ = config.build_curve();
    let _ = config.solver_config();
    let _ = config.sim_config();

    // Whatever parsed must survive a serialize/parse round trip.
    let again = config.to_toml();
    let _ = RunConfig::from_toml(&again);
});
