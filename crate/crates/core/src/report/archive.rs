//! Deterministic run archives: POSIX ustar layout with sorted entries,
//! zeroed timestamps and fixed ownership, so archiving the same run twice
//! is byte-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::ReportError;

const BLOCK: usize = 512;

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Collect every file under `root`, as sorted relative paths.
fn collect_files(root: &Path, current: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(current)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.is_file() {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    Ok(())
}

fn header(name: &str, size: u64, is_dir: bool) -> Result<[u8; BLOCK], ReportError> {
    let mut block = [0u8; BLOCK];
    let name_bytes = name.as_bytes();
    if name_bytes.len() > 100 {
        return Err(ReportError::Archive(format!(
            "path too long for ustar header: {name}"
        )));
    }
    block[..name_bytes.len()].copy_from_slice(name_bytes);
    let mode = if is_dir { "0000755" } else { "0000644" };
    block[100..107].copy_from_slice(mode.as_bytes());
    block[108..115].copy_from_slice(b"0000000"); // uid
    block[116..123].copy_from_slice(b"0000000"); // gid
    let size_field = format!("{size:011o}");
    block[124..135].copy_from_slice(size_field.as_bytes());
    block[136..147].copy_from_slice(b"00000000000"); // mtime = 0
    block[156] = if is_dir { b'5' } else { b'0' };
    block[257..262].copy_from_slice(b"ustar");
    block[263..265].copy_from_slice(b"00");
    // Checksum: spaces while summing, then written with a trailing NUL+space.
    for b in &mut block[148..156] {
        *b = b' ';
    }
    let sum: u32 = block.iter().map(|&b| b as u32).sum();
    let checksum = format!("{sum:06o}\0 ");
    block[148..156].copy_from_slice(checksum.as_bytes());
    Ok(block)
}

/// Archive a completed run directory into a single deterministic tar file.
pub fn export_archive(run_dir: &Path, dest: &Path) -> Result<(), ReportError> {
    if !run_dir.is_dir() {
        return Err(ReportError::Archive(format!(
            "{} is not a directory",
            run_dir.display()
        )));
    }
    let mut files = Vec::new();
    collect_files(run_dir, run_dir, &mut files).map_err(|e| io_err(run_dir, e))?;
    if files.is_empty() {
        return Err(ReportError::Archive("run directory is empty".into()));
    }
    files.sort();

    // Emit parent directory entries ahead of their files, each once.
    let mut out: Vec<u8> = Vec::new();
    let mut seen_dirs: Vec<String> = Vec::new();
    for rel in &files {
        let mut ancestors: Vec<PathBuf> = rel.ancestors().skip(1).map(PathBuf::from).collect();
        ancestors.reverse();
        for dir in ancestors {
            if dir.as_os_str().is_empty() {
                continue;
            }
            let name = format!("{}/", dir.to_string_lossy());
            if !seen_dirs.contains(&name) {
                out.extend_from_slice(&header(&name, 0, true)?);
                seen_dirs.push(name);
            }
        }
        let contents = std::fs::read(run_dir.join(rel)).map_err(|e| io_err(rel, e))?;
        let name = rel.to_string_lossy().replace('\\', "/");
        out.extend_from_slice(&header(&name, contents.len() as u64, false)?);
        out.extend_from_slice(&contents);
        let pad = (BLOCK - contents.len() % BLOCK) % BLOCK;
        out.extend(std::iter::repeat_n(0u8, pad));
    }
    out.extend(std::iter::repeat_n(0u8, 2 * BLOCK));

    let mut file = std::fs::File::create(dest).map_err(|e| io_err(dest, e))?;
    file.write_all(&out).map_err(|e| io_err(dest, e))
}

/// Extract an archive produced by [`export_archive`].
pub fn extract_archive(archive: &Path, dest_dir: &Path) -> Result<(), ReportError> {
    let bytes = std::fs::read(archive).map_err(|e| io_err(archive, e))?;
    let mut offset = 0usize;
    while offset + BLOCK <= bytes.len() {
        let block = &bytes[offset..offset + BLOCK];
        offset += BLOCK;
        if block.iter().all(|&b| b == 0) {
            break;
        }
        let name_end = block[..100].iter().position(|&b| b == 0).unwrap_or(100);
        let name = std::str::from_utf8(&block[..name_end])
            .map_err(|_| ReportError::Archive("non-utf8 entry name".into()))?
            .to_string();
        if name.contains("..") || name.starts_with('/') {
            return Err(ReportError::Archive(format!("unsafe entry path {name}")));
        }
        let size_field = std::str::from_utf8(&bytes[offset - BLOCK + 124..offset - BLOCK + 135])
            .map_err(|_| ReportError::Archive("bad size field".into()))?;
        let size = u64::from_str_radix(size_field.trim_end_matches('\0').trim(), 8)
            .map_err(|_| ReportError::Archive("bad size field".into()))?
            as usize;
        let kind = block[156];
        let target = dest_dir.join(&name);
        if kind == b'5' {
            std::fs::create_dir_all(&target).map_err(|e| io_err(&target, e))?;
        } else {
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            if offset + size > bytes.len() {
                return Err(ReportError::Archive("truncated archive".into()));
            }
            std::fs::write(&target, &bytes[offset..offset + size])
                .map_err(|e| io_err(&target, e))?;
            offset += size + (BLOCK - size % BLOCK) % BLOCK;
        }
    }
    Ok(())
}
