use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::oracle::procedural_oracle_pair;
use crate::common::{keyed_hash, load_image, save_image, ImageTensor, RefineParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub supports_text_to_image: bool,
    pub supports_image_to_image: bool,
}

/// A text-to-image / image-to-image generator.
///
/// `generate` must be deterministic in `(prompt, seed, size)` and `refine`
/// must return an image with the input's dimensions.
pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn capabilities(&self) -> Capabilities;
    fn generate(&self, prompt: &str, seed: u64, size: (usize, usize)) -> Result<ImageTensor>;
    fn refine(
        &self,
        image: &ImageTensor,
        prompt: &str,
        params: &RefineParams,
        seed: u64,
    ) -> Result<ImageTensor>;
    /// Whether calls may run from several threads at once.
    fn concurrent(&self) -> bool {
        false
    }
}

fn oracle_seed(prompt: &str, seed: u64) -> u64 {
    keyed_hash(seed, prompt.as_bytes())
}

/// Produces the degraded half of a procedural pair.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleDistilled;

/// Produces the clean half of a procedural pair; `refine` ignores the pixels
/// of its input and regenerates the matching clean image.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleBaseline;

impl GeneratorBackend for OracleDistilled {
    fn name(&self) -> &str {
        "oracle-distilled"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_text_to_image: true, supports_image_to_image: false }
    }

    fn generate(&self, prompt: &str, seed: u64, size: (usize, usize)) -> Result<ImageTensor> {
        Ok(procedural_oracle_pair(oracle_seed(prompt, seed), size)?.0)
    }

    fn refine(&self, _: &ImageTensor, _: &str, _: &RefineParams, _: u64) -> Result<ImageTensor> {
        Err(Error::BackendFailure { id: String::new(), reason: "oracle-distilled has no image-to-image mode".into() })
    }

    fn concurrent(&self) -> bool {
        true
    }
}

impl GeneratorBackend for OracleBaseline {
    fn name(&self) -> &str {
        "oracle-baseline"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_text_to_image: true, supports_image_to_image: true }
    }

    fn generate(&self, prompt: &str, seed: u64, size: (usize, usize)) -> Result<ImageTensor> {
        Ok(procedural_oracle_pair(oracle_seed(prompt, seed), size)?.1)
    }

    fn refine(&self, image: &ImageTensor, prompt: &str, _: &RefineParams, seed: u64) -> Result<ImageTensor> {
        self.generate(prompt, seed, (image.height(), image.width()))
    }

    fn concurrent(&self) -> bool {
        true
    }
}

/// The procedural distilled/baseline pair.
pub fn oracle_backends() -> (OracleDistilled, OracleBaseline) {
    (OracleDistilled, OracleBaseline)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendMode {
    Generate,
    Refine,
}

/// Request written as one JSON line to an external backend's stdin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub prompt: String,
    pub seed: u64,
    pub size: [usize; 2],
    pub mode: BackendMode,
    pub refine_params: Option<RefineParams>,
    pub input_image: Option<PathBuf>,
}

/// Response read as JSON from an external backend's stdout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub output_image: PathBuf,
}

/// Runs an external program once per call, exchanging [`BackendRequest`] and
/// [`BackendResponse`] records over stdin/stdout.
pub struct CommandBackend {
    name: String,
    program: PathBuf,
    args: Vec<String>,
    work_dir: PathBuf,
    capabilities: Capabilities,
}

impl CommandBackend {
    pub fn new(
        name: impl Into<String>,
        program: impl Into<PathBuf>,
        args: Vec<String>,
        work_dir: impl Into<PathBuf>,
        capabilities: Capabilities,
    ) -> Self {
        Self { name: name.into(), program: program.into(), args, work_dir: work_dir.into(), capabilities }
    }

    fn call(&self, request: &BackendRequest) -> Result<ImageTensor> {
        let fail = |reason: String| Error::BackendFailure { id: String::new(), reason };
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("spawn {}: {e}", self.program.display())))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            writeln!(stdin, "{}", serde_json::to_string(request)?)?;
        }
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(fail(format!(
                "{} exited with {}: {}",
                self.name,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let response: BackendResponse = serde_json::from_slice(&out.stdout)
            .map_err(|e| fail(format!("bad response from {}: {e}", self.name)))?;
        load_image(&response.output_image)
    }
}

impl GeneratorBackend for CommandBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    fn generate(&self, prompt: &str, seed: u64, size: (usize, usize)) -> Result<ImageTensor> {
        self.call(&BackendRequest {
            prompt: prompt.into(),
            seed,
            size: [size.0, size.1],
            mode: BackendMode::Generate,
            refine_params: None,
            input_image: None,
        })
    }

    fn refine(&self, image: &ImageTensor, prompt: &str, params: &RefineParams, seed: u64) -> Result<ImageTensor> {
        std::fs::create_dir_all(&self.work_dir)?;
        let input = self.work_dir.join(format!("input-{seed:016x}.png"));
        save_image(image, &input)?;
        let out = self.call(&BackendRequest {
            prompt: prompt.into(),
            seed,
            size: [image.height(), image.width()],
            mode: BackendMode::Refine,
            refine_params: Some(*params),
            input_image: Some(input),
        })?;
        if (out.height(), out.width()) != (image.height(), image.width()) {
            return Err(Error::BackendFailure {
                id: String::new(),
                reason: format!(
                    "{} returned {}x{} for a {}x{} input",
                    self.name,
                    out.height(),
                    out.width(),
                    image.height(),
                    image.width()
                ),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_halves_match() {
        let (a, b) = oracle_backends();
        let src = a.generate("p", 11, (48, 40)).unwrap();
        assert_eq!(src, a.generate("p", 11, (48, 40)).unwrap());
        let tgt = b.refine(&src, "p", &RefineParams::default(), 11).unwrap();
        assert_eq!((tgt.height(), tgt.width()), (48, 40));
        let (d, c) = procedural_oracle_pair(oracle_seed("p", 11), (48, 40)).unwrap();
        assert_eq!((src, tgt), (d.clone(), c));
        assert_ne!(a.generate("q", 11, (48, 40)).unwrap(), d);
    }
}
