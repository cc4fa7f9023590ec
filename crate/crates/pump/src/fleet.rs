//! Many devices at once, one thread each, nothing shared between them.

use mediflow_core::Timestamp;

use crate::device::{run_session, DeviceConfig, PumpError, SessionReport};
use crate::transport::Transport;

/// Runs every config to completion in parallel. `make_transport(i)` builds
/// device `i`'s transport on that device's thread. Reports keep input order.
pub fn run_fleet<T, F>(
    configs: Vec<DeviceConfig>,
    epoch: Timestamp,
    make_transport: F,
) -> Vec<Result<SessionReport, PumpError>>
where
    T: Transport,
    F: Fn(usize) -> T + Sync,
{
    let make = &make_transport;
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .into_iter()
            .enumerate()
            .map(|(i, cfg)| scope.spawn(move || run_session(cfg, make(i), epoch)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("device thread panicked"))
            .collect()
    })
}
