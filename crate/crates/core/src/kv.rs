//! Flat `key = value` text files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Duplicate keys are rejected. Consumers take entries out of a [`KvFile`]
//! by name and call [`KvFile::finish`] so that any key nobody claimed is
//! reported as an error with its line number.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            entries.insert(key.to_string(), (line, value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|e| Error::Parse {
                line,
                message: format!("bad value for `{key}`: {e}"),
            }),
        }
    }

    /// Comma-separated list.
    pub fn take_list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => {
                if value.is_empty() {
                    return Ok(Some(Vec::new()));
                }
                value
                    .split(',')
                    .map(|item| {
                        item.trim().parse::<T>().map_err(|e| Error::Parse {
                            line,
                            message: format!("bad list item for `{key}`: {e}"),
                        })
                    })
                    .collect::<Result<Vec<T>>>()
                    .map(Some)
            }
        }
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => match value.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(Error::Parse {
                    line,
                    message: format!("bad boolean for `{key}`: `{other}`"),
                }),
            },
        }
    }

    /// Fails on the first (lowest line number) unclaimed key.
    pub fn finish(self) -> Result<()> {
        match self.entries.iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Parse {
                line: *line,
                message: format!("unknown key `{key}`"),
            }),
        }
    }
}

/// Renders a list the way [`KvFile::take_list`] reads it.
pub fn join<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
