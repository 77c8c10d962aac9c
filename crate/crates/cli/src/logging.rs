//! Forwards records to `env_logger` and keeps every warning for the run report.

use std::sync::{Mutex, OnceLock};

use log::{Level, LevelFilter, Log, Metadata, Record};

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());
static LOGGER: OnceLock<Recorder> = OnceLock::new();

struct Recorder {
    inner: env_logger::Logger,
}

impl Log for Recorder {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Warn || self.inner.enabled(metadata)
    }

    fn log(&self, record: &Record) {
        if record.level() <= Level::Warn {
            WARNINGS.lock().unwrap().push(record.args().to_string());
        }
        self.inner.log(record);
    }

    fn flush(&self) {
        self.inner.flush();
    }
}

/// Installs the recording logger. `RUST_LOG` controls what reaches stderr;
/// warnings default to visible.
pub fn init() {
    let logger = LOGGER.get_or_init(|| Recorder {
        inner: env_logger::Builder::new()
            .filter_level(LevelFilter::Warn)
            .parse_default_env()
            .build(),
    });
    let max = logger.inner.filter().max(LevelFilter::Warn);
    if log::set_logger(logger).is_ok() {
        log::set_max_level(max);
    }
}

/// Records a warning raised by the CLI itself.
pub fn warn(message: impl Into<String>) {
    let message = message.into();
    log::warn!("{message}");
    if LOGGER.get().is_none() {
        WARNINGS.lock().unwrap().push(message);
    }
}

/// Drains the warnings collected so far.
pub fn take_warnings() -> Vec<String> {
    std::mem::take(&mut *WARNINGS.lock().unwrap())
}
