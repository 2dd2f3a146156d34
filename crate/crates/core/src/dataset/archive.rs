use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use zip::write::SimpleFileOptions;
use zip::CompressionMethod;

use super::{is_safe_relative, DatasetError};

/// Top-level directory of the source archive, relative to the archive root.
pub const ARCHIVE_DIR: &str = "files";

/// File-system friendly name for a repository URL or path:
/// `https://github.com/o/r.git` becomes `github.com_o_r`.
///
/// Distinct URLs can collide only if they differ solely in `/` versus `:`
/// or `_` placement, or in scheme and user part.
pub fn repo_slug(url: &str) -> String {
    let mut s = url.trim();
    if let Some(i) = s.find("://") {
        s = &s[i + 3..];
    }
    if let Some(i) = s.find('@') {
        if !s[..i].contains('/') {
            s = &s[i + 1..];
        }
    }
    let s = s.trim_end_matches('/');
    let s = s.strip_suffix(".git").unwrap_or(s);
    let slug = s.replace(['/', ':', '\\'], "_");
    // relative paths such as `./demo` or `../x` would give hidden names
    let slug = slug.trim_start_matches(['_', '.']);
    if slug.is_empty() {
        "repo".to_string()
    } else {
        slug.to_string()
    }
}

/// Store `content` at `files/<repo_slug>/<parent_sha>/<path>` below
/// `archive_root` and return that archive-relative path. Existing files are
/// left untouched, so each snapshot is stored once.
pub fn archive_source(
    repo_url: &str,
    parent_sha: &str,
    path: &str,
    content: &[u8],
    archive_root: &Path,
) -> Result<String, DatasetError> {
    if !is_safe_relative(path) {
        return Err(DatasetError::UnsafePath(path.to_string()));
    }
    let slug = repo_slug(repo_url);
    if !is_safe_relative(&slug) || !is_safe_relative(parent_sha) {
        return Err(DatasetError::UnsafePath(format!("{slug}/{parent_sha}")));
    }
    let relative = format!("{ARCHIVE_DIR}/{slug}/{parent_sha}/{path}");
    let target = archive_root.join(&relative);
    if target.is_file() {
        return Ok(relative);
    }
    let dir = target.parent().expect("has parent");
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        target.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, &target)?;
    Ok(relative)
}

/// Pack everything below `archive_root/files` into a ZIP whose entries keep
/// the `files/...` layout. Entries are sorted and carry fixed timestamps and
/// permissions, so identical archives produce identical bytes.
pub fn pack_archive(archive_root: &Path, zip_path: &Path) -> Result<usize, DatasetError> {
    let mut entries = Vec::new();
    collect_files(&archive_root.join(ARCHIVE_DIR), &mut entries)?;
    let mut names: Vec<(String, PathBuf)> = entries
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(archive_root).expect("below root");
            let name = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            (name, p)
        })
        .collect();
    names.sort();

    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    let mut zip = zip::ZipWriter::new(File::create(zip_path)?);
    for (name, path) in &names {
        zip.start_file(name.as_str(), options)?;
        zip.write_all(&std::fs::read(path)?)?;
    }
    zip.finish()?;
    Ok(names.len())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(&path, out)?;
        } else if !entry.file_name().to_string_lossy().ends_with(".tmp") {
            out.push(path);
        }
    }
    Ok(())
}
