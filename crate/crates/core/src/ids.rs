//! Opaque identifiers for domains, assets, players, pools and actions.

use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const MAX_ID_LEN: usize = 64;

fn check(kind: &'static str, s: &str) -> Result<(), Error> {
    let reason = if s.is_empty() {
        "empty"
    } else if s.len() > MAX_ID_LEN {
        "longer than 64 characters"
    } else if !s
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
    {
        "characters outside [A-Za-z0-9_.-]"
    } else {
        return Ok(());
    };
    Err(Error::InvalidId { kind, value: s.to_string(), reason })
}

macro_rules! define_id {
    ($(#[$meta:meta])* $name:ident, $kind:literal) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub const KIND: &'static str = $kind;

            pub fn new(s: impl AsRef<str>) -> Result<Self, Error> {
                let s = s.as_ref();
                check($kind, s)?;
                Ok($name(Arc::from(s)))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), &*self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl std::str::FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self, Error> {
                $name::new(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                $name::new(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

define_id!(
    /// A domain: an L1, L2, shard, or exchange with its own sequencer.
    DomainId,
    "domain"
);
define_id!(AssetId, "asset");
define_id!(PlayerId, "player");
define_id!(PoolId, "pool");
define_id!(
    /// Identifies an action template, pending transaction, or arbitrage leg.
    ActionId,
    "action"
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charset_and_length() {
        assert!(DomainId::new("eth-mainnet_1.0").is_ok());
        assert!(DomainId::new("").is_err());
        assert!(DomainId::new("a b").is_err());
        assert!(DomainId::new("a:b").is_err());
        assert!(AssetId::new("x".repeat(64)).is_ok());
        assert!(AssetId::new("x".repeat(65)).is_err());
    }

    #[test]
    fn case_sensitive() {
        assert_ne!(AssetId::new("eth").unwrap(), AssetId::new("ETH").unwrap());
    }

    #[test]
    fn deserialize_validates() {
        assert!(serde_json::from_str::<PoolId>("\"uni\"").is_ok());
        assert!(serde_json::from_str::<PoolId>("\"uni swap\"").is_err());
    }
}
