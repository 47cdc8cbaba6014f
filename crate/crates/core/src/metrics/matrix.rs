use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{diversity, MetricsError};

/// Mean cross-play scores of every ordered pair of agents, symmetrized by
/// averaging both seat orders. `mean[i][i]` is agent `i`'s self-play score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossPlayMatrix {
    pub ids: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Games per seat order in each cell.
    pub games_per_cell: usize,
    pub max_score: f64,
}

impl CrossPlayMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn self_play(&self, i: usize) -> f64 {
        self.mean[i][i]
    }

    pub fn diversity(&self) -> Result<f64, MetricsError> {
        diversity(&self.mean, self.max_score)
    }

    /// Rows and columns `indices`, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let pick = |m: &Vec<Vec<f64>>| indices.iter().map(|&i| indices.iter().map(|&j| m[i][j]).collect()).collect();
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            mean: pick(&self.mean),
            stderr: pick(&self.stderr),
            games_per_cell: self.games_per_cell,
            max_score: self.max_score,
        }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let n = self.ids.len();
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if !square(&self.mean) || !square(&self.stderr) {
            return Err(MetricsError::Misaligned("matrix shape does not match ids".into()));
        }
        if let Some(v) = self.mean.iter().flatten().find(|&&v| !(0.0..=self.max_score).contains(&v)) {
            return Err(MetricsError::OutOfRange(format!("cell {v} outside [0, {}]", self.max_score)));
        }
        Ok(())
    }

    /// Writes the means and standard errors as two CSV files with a header
    /// row and column of agent ids. `header` lines are prefixed with `# `.
    pub fn write_csv(&self, mean_path: &Path, stderr_path: &Path, header: &[String]) -> std::io::Result<()> {
        write_table(mean_path, &self.ids, &self.mean, header)?;
        write_table(stderr_path, &self.ids, &self.stderr, header)
    }
}

fn write_table(path: &Path, ids: &[String], cells: &[Vec<f64>], header: &[String]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    for line in header {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    let mut head = vec!["agent".to_string()];
    head.extend(ids.iter().cloned());
    w.write_record(&head)?;
    for (id, row) in ids.iter().zip(cells) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CrossPlayMatrix {
        CrossPlayMatrix {
            ids: vec!["a".into(), "b".into(), "c".into()],
            mean: vec![vec![9.0, 2.0, 3.0], vec![2.0, 8.0, 4.0], vec![3.0, 4.0, 7.0]],
            stderr: vec![vec![0.1; 3]; 3],
            games_per_cell: 10,
            max_score: 10.0,
        }
    }

    #[test]
    fn submatrix_reorders() {
        let m = sample().submatrix(&[2, 0]);
        assert_eq!(m.ids, vec!["c", "a"]);
        assert_eq!(m.mean, vec![vec![7.0, 3.0], vec![3.0, 9.0]]);
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("m.csv"), dir.path().join("s.csv"));
        sample().write_csv(&a, &b, &["spec x".into()]).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# spec x");
        assert_eq!(lines[1], "agent,a,b,c");
        assert_eq!(lines[2], "a,9,2,3");
        assert!(std::fs::read_to_string(&b).unwrap().contains("b,0.1,0.1,0.1"));
    }

    #[test]
    fn out_of_range_rejected() {
        let mut m = sample();
        m.mean[0][1] = 11.0;
        assert!(m.validate().is_err());
    }
}
