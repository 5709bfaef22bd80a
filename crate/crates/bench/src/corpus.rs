//! Corpus directories of WAV files, and the bundled synthetic corpus.

use std::fs;
use std::path::{Path, PathBuf};

use sebench_core::audio::{read_wav, resample, write_wav, WavEncoding};
use sebench_core::{synth, AudioClip};

use crate::BenchError;

/// Working sample rate of the benchmark.
pub const BENCH_RATE_HZ: u32 = 16_000;

/// One corpus file: its id (the file stem) and the loaded, resampled clip or
/// the reason it could not be loaded.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
    pub clip: Result<AudioClip, String>,
}

/// `*.wav` files directly inside `dir`, sorted by file name.
pub fn list_wavs(dir: &Path) -> Result<Vec<(String, PathBuf)>, BenchError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))? {
        let path = entry.map_err(|e| BenchError::io(dir, e))?.path();
        let is_wav = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push((id, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Load every WAV in `dir` at [`BENCH_RATE_HZ`]. Unreadable files are kept
/// with their error so the caller can skip the affected scenarios.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, BenchError> {
    let files = list_wavs(dir)?;
    if files.is_empty() {
        return Err(BenchError::Config(format!("no .wav files in {}", dir.display())));
    }
    Ok(files
        .into_iter()
        .map(|(id, path)| {
            let clip = read_wav(&path)
                .and_then(|c| resample(&c, BENCH_RATE_HZ))
                .map_err(|e| e.to_string());
            CorpusEntry { id, path, clip }
        })
        .collect())
}

/// Write the small synthetic corpus used by the tests and examples: four
/// speech-like clean files and four noise types, all 16-bit. One noise file
/// is stored at 8 kHz so ingest resampling is exercised.
pub fn write_synthetic_corpus(root: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let clean_dir = root.join("clean");
    let noise_dir = root.join("noise");
    for d in [&clean_dir, &noise_dir] {
        fs::create_dir_all(d).map_err(|e| BenchError::io(d, e))?;
    }
    let fs_hz = BENCH_RATE_HZ;
    let clean_len = 2 * fs_hz as usize;
    let noise_len = 5 * fs_hz as usize / 2;
    let mut files = Vec::new();
    let mut put = |path: PathBuf, samples: Vec<f64>, rate: u32| -> Result<(), BenchError> {
        let clip = AudioClip::new(samples, rate)?;
        write_wav(&clip, &path, WavEncoding::Pcm16)?;
        files.push(path);
        Ok(())
    };
    for (i, amp) in [0.5, 0.35, 0.6, 0.45].into_iter().enumerate() {
        let seed = 100 + i as u64;
        let lead = 0.05 + 0.05 * i as f64;
        put(
            clean_dir.join(format!("utt{i:02}.wav")),
            synth::speech_like(clean_len, fs_hz, amp, lead, seed),
            fs_hz,
        )?;
    }
    put(noise_dir.join("babble.wav"), synth::babble_noise(noise_len, fs_hz, 0.2, 201), fs_hz)?;
    put(noise_dir.join("hum.wav"), synth::hum_noise(noise_len, fs_hz, 0.2, 202), fs_hz)?;
    put(noise_dir.join("lowpass.wav"), synth::lowpass_noise(noise_len / 2, 0.2, 0.9, 203), fs_hz / 2)?;
    put(noise_dir.join("white.wav"), synth::white_noise(noise_len, 0.2, 204), fs_hz)?;
    Ok(files)
}
