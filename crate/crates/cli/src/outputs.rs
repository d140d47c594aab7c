use std::fs;
use std::path::{Path, PathBuf};

/// Files written by one command. Unless `keep` is called they are deleted
/// when the set is dropped, so a failed run leaves nothing half-written.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            keep: false,
        })
    }

    /// Registers `name` (and its sidecar, if any) and returns its path.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        self.files.push(fimlfm::io::meta_path(&path));
        path
    }

    pub fn keep(mut self) -> Vec<PathBuf> {
        self.keep = true;
        std::mem::take(&mut self.files).into_iter().filter(|p| p.exists()).collect()
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.keep {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
