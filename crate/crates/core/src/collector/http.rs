//! JSON-over-HTTP stats source.
//!
//! Expected endpoints, relative to the base URL:
//!
//! - `GET /feeds/{trending|recent}` returns `{"video_ids": ["...", ...]}`
//! - `GET /videos/{id}` returns `{"views": n, "likes": n, "comments": n}`;
//!   status 410, or a body of `{"gone": true}`, means the video was taken
//!   down. Anything else that fails is treated as transient.

use std::time::Duration;

use serde::Deserialize;
use ureq::Agent;

use super::source::{SourceError, StatsResponse, StatsSource};
use crate::timeseries::Feed;

#[derive(Debug, Deserialize)]
struct FeedBody {
    video_ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct StatsBody {
    #[serde(default)]
    gone: bool,
    #[serde(default)]
    views: u64,
    #[serde(default)]
    likes: u64,
    #[serde(default)]
    comments: u64,
}

pub struct HttpSource {
    base_url: String,
    agent: Agent,
}

impl HttpSource {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }
}

impl StatsSource for HttpSource {
    fn list_feed(&mut self, feed: Feed, _now: i64) -> Result<Vec<String>, SourceError> {
        let url = format!("{}/feeds/{}", self.base_url, feed);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| SourceError::Unreachable(format!("{url}: {e}")))?;
        if !resp.status().is_success() {
            return Err(SourceError::Unreachable(format!("{url}: status {}", resp.status())));
        }
        let body: FeedBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| SourceError::Unreachable(format!("{url}: {e}")))?;
        Ok(body.video_ids)
    }

    fn get_stats(&mut self, video_id: &str, _now: i64) -> Result<StatsResponse, SourceError> {
        let url = format!("{}/videos/{}", self.base_url, video_id);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| SourceError::Fetch(format!("{url}: {e}")))?;
        if resp.status().as_u16() == 410 {
            return Ok(StatsResponse::Gone);
        }
        if !resp.status().is_success() {
            return Err(SourceError::Fetch(format!("{url}: status {}", resp.status())));
        }
        let body: StatsBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| SourceError::Fetch(format!("{url}: {e}")))?;
        Ok(if body.gone {
            StatsResponse::Gone
        } else {
            StatsResponse::Counters {
                views: body.views,
                likes: body.likes,
                comments: body.comments,
            }
        })
    }
}
