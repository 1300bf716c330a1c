//! Configuration lookups that remember every resolved value for the sidecar file.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gradphase::config::Config;
use gradphase::io::fmt_num;
use gradphase::{Error, Result};

pub struct Run {
    cfg: Config,
    base_dir: PathBuf,
    resolved: RefCell<BTreeMap<String, String>>,
}

/// Values whose text form must read back exactly.
pub trait Recorded: FromStr {
    fn record(&self) -> String;
}

macro_rules! recorded_display {
    ($($t:ty),*) => {
        $(impl Recorded for $t {
            fn record(&self) -> String {
                self.to_string()
            }
        })*
    };
}

recorded_display!(u32, u64, usize, bool, String, gradphase::atomic_levels::ZeemanMode);

impl Recorded for f64 {
    fn record(&self) -> String {
        fmt_num(*self)
    }
}

impl Run {
    pub fn new(cfg: Config) -> Self {
        let base_dir = cfg
            .path()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Run {
            cfg,
            base_dir,
            resolved: RefCell::default(),
        }
    }

    fn note(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    pub fn get<T: Recorded>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let v: Option<T> = self.cfg.get(key)?;
        if let Some(v) = &v {
            self.note(key, v.record());
        }
        Ok(v)
    }

    pub fn get_or<T: Recorded>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.cfg.get(key)?.unwrap_or(default);
        self.note(key, v.record());
        Ok(v)
    }

    pub fn list<T: Recorded>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let v: Option<Vec<T>> = self.cfg.get_list(key)?;
        if let Some(v) = &v {
            self.note(key, v.iter().map(Recorded::record).collect::<Vec<_>>().join(", "));
        }
        Ok(v)
    }

    pub fn list_or<T: Recorded + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let v = self.cfg.get_list(key)?.unwrap_or_else(|| default.to_vec());
        self.note(key, v.iter().map(Recorded::record).collect::<Vec<_>>().join(", "));
        Ok(v)
    }

    /// Fixed-length numeric vector.
    pub fn vec3_or(&self, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
        let v = self.list_or(key, &default)?;
        v.try_into()
            .map_err(|v: Vec<f64>| Error::config(key, format!("expected 3 comma-separated numbers, got {}", v.len())))
    }

    /// Path relative to the config file's directory, recorded in absolute form.
    pub fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        let Some(raw) = self.cfg.raw(key) else {
            return Ok(None);
        };
        let p = Path::new(raw);
        let joined = if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) };
        let resolved = std::path::absolute(&joined).unwrap_or(joined);
        self.note(key, resolved.display().to_string());
        Ok(Some(resolved))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)?.ok_or_else(|| Error::config(key, "required key is missing"))
    }

    pub fn unused_keys(&self) -> Vec<String> {
        self.cfg.unused_keys()
    }

    /// Sidecar text: every resolved key, sorted, in config syntax.
    pub fn sidecar(&self, command: &str) -> String {
        let mut out = format!("# gradphase {command}: resolved run parameters\n");
        for (k, v) in self.resolved.borrow().iter() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
