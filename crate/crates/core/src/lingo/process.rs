use serde::Serialize;

use super::{Annotation, AnalysisError, AnnotatorProvider};
use crate::plugin::LineClient;

#[derive(Serialize)]
struct Request<'a> {
    text: &'a str,
}

/// Provider backed by an external process: one `{"text": ..}` line in, one
/// annotation object line out.
pub struct ProcessProvider {
    name: String,
    client: LineClient,
}

impl ProcessProvider {
    pub fn spawn(name: &str, program: &str, args: &[String]) -> Result<Self, AnalysisError> {
        let client = LineClient::spawn(program, args).map_err(|e| AnalysisError::provider(name, e))?;
        Ok(ProcessProvider { name: name.to_string(), client })
    }
}

impl AnnotatorProvider for ProcessProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn annotate(&self, text: &str) -> Result<Annotation, AnalysisError> {
        self.client.call::<_, Annotation>(&Request { text }).map_err(|e| AnalysisError::provider(&self.name, e))
    }
}
