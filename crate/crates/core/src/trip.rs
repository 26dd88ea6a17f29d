//! Trip requests: one commuter's endpoints and departure/arrival window.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::road::JunctionId;
use crate::{Error, Result};

/// Opaque commuter identifier. Ordering on the underlying string is the
/// global tie-break order used everywhere in the engine.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommuterId(pub String);

impl CommuterId {
    pub fn new(id: impl Into<String>) -> Self {
        CommuterId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CommuterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CommuterId {
    fn from(s: &str) -> Self {
        CommuterId(s.to_string())
    }
}

impl From<String> for CommuterId {
    fn from(s: String) -> Self {
        CommuterId(s)
    }
}

/// One commuter's ride request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRequest {
    pub commuter_id: CommuterId,
    pub source: JunctionId,
    pub destination: JunctionId,
    /// Earliest departure, epoch seconds.
    pub earliest_departure_s: f64,
    /// Latest arrival, epoch seconds.
    pub latest_arrival_s: f64,
}

impl TripRequest {
    pub fn new(
        commuter_id: impl Into<CommuterId>,
        source: impl Into<JunctionId>,
        destination: impl Into<JunctionId>,
        earliest_departure_s: f64,
        latest_arrival_s: f64,
    ) -> Result<Self> {
        let trip = TripRequest {
            commuter_id: commuter_id.into(),
            source: source.into(),
            destination: destination.into(),
            earliest_departure_s,
            latest_arrival_s,
        };
        trip.validate()?;
        Ok(trip)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source == self.destination {
            return Err(Error::input(format!(
                "trip {}: source equals destination ({})",
                self.commuter_id, self.source
            )));
        }
        if !(self.earliest_departure_s.is_finite() && self.latest_arrival_s.is_finite()) {
            return Err(Error::input(format!("trip {}: non-finite time window", self.commuter_id)));
        }
        if self.earliest_departure_s >= self.latest_arrival_s {
            return Err(Error::input(format!(
                "trip {}: earliest departure {} is not before latest arrival {}",
                self.commuter_id, self.earliest_departure_s, self.latest_arrival_s
            )));
        }
        Ok(())
    }
}
