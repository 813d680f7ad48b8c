// SPDX-License-Identifier: Apache-2.0

//! DVS event streams and their conversion into network input frames.

mod format;
mod frames;
mod synth;

pub use format::{parse_events, parse_events_file, read_csv, read_evt1, write_csv, write_evt1, write_events_file, EventFormat, EVT1_MAGIC};
pub use frames::{
    accumulate_frames, downsample, downsample_by, normalize_frames, preprocess, read_frames, write_frames, FrameMeta,
    FrameSequence, PrepConfig, RawFrames,
};
pub use synth::{generate_synthetic, BarTrajectory, SynthSpec, SyntheticSample};

/// Sensor width and height of the DVS128.
pub const DVS128_SIZE: u16 = 128;

pub const POLARITY_OFF: u8 = 0;
pub const POLARITY_ON: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: u8,
}

/// Events of one recording, sorted by non-decreasing timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub sensor_w: u16,
    pub sensor_h: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    pub fn new(sensor_w: u16, sensor_h: u16) -> Self {
        Self {
            sensor_w,
            sensor_h,
            events: Vec::new(),
        }
    }

    /// Builds a stream, checking bounds, polarity and timestamp order.
    pub fn from_events(sensor_w: u16, sensor_h: u16, events: Vec<Event>) -> crate::Result<Self> {
        let stream = Self {
            sensor_w,
            sensor_h,
            events,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let mut prev = 0;
        for (i, e) in self.events.iter().enumerate() {
            check_event(i, e, self.sensor_w, self.sensor_h, prev)?;
            prev = e.t;
        }
        Ok(())
    }

    /// `(first, last)` timestamps, if any.
    pub fn time_span(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }
}

pub(crate) fn check_event(record: usize, e: &Event, w: u16, h: u16, prev_t: u64) -> crate::Result<()> {
    if e.x >= w || e.y >= h {
        return Err(crate::Error::OutOfBounds {
            record,
            x: e.x.into(),
            y: e.y.into(),
            width: w,
            height: h,
        });
    }
    if e.polarity > 1 {
        return Err(crate::Error::Parse {
            record,
            message: format!("polarity must be 0 or 1, got {}", e.polarity),
        });
    }
    if record > 0 && e.t < prev_t {
        return Err(crate::Error::Order {
            record,
            prev: prev_t,
            t: e.t,
        });
    }
    Ok(())
}
