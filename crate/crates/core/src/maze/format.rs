//! Plain-text maze format.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! bounds x1 y1 x2 y2
//! start x y
//! goal x y r
//! horizon T
//! wall x1 y1 x2 y2
//! ```

use crate::error::{Error, Result};
use crate::maze::{MazeSpec, Rect, Segment, Vec2};

pub fn parse_maze(text: &str) -> Result<MazeSpec> {
    parse_maze_named(text, "maze")
}

pub(crate) fn parse_maze_named(text: &str, name: &str) -> Result<MazeSpec> {
    let mut walls = Vec::new();
    let mut start = None;
    let mut goal = None;
    let mut threshold = None;
    let mut horizon = None;
    let mut bounds = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().expect("non-empty line");
        let nums: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| {
                    Error::InvalidMaze(format!("line {}: bad number '{p}'", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        let expect = |n: usize| -> Result<()> {
            if nums.len() != n {
                return Err(Error::InvalidMaze(format!(
                    "line {}: '{keyword}' expects {n} numbers, got {}",
                    lineno + 1,
                    nums.len()
                )));
            }
            Ok(())
        };
        match keyword {
            "wall" => {
                expect(4)?;
                walls.push(Segment::new(
                    Vec2::new(nums[0], nums[1]),
                    Vec2::new(nums[2], nums[3]),
                ));
            }
            "start" => {
                expect(2)?;
                start = Some(Vec2::new(nums[0], nums[1]));
            }
            "goal" => {
                expect(3)?;
                goal = Some(Vec2::new(nums[0], nums[1]));
                threshold = Some(nums[2]);
            }
            "bounds" => {
                expect(4)?;
                bounds = Some(Rect {
                    min: Vec2::new(nums[0].min(nums[2]), nums[1].min(nums[3])),
                    max: Vec2::new(nums[0].max(nums[2]), nums[1].max(nums[3])),
                });
            }
            "horizon" => {
                expect(1)?;
                if nums[0] < 1.0 || nums[0].fract() != 0.0 {
                    return Err(Error::InvalidMaze(format!(
                        "line {}: horizon must be a positive integer",
                        lineno + 1
                    )));
                }
                horizon = Some(nums[0] as usize);
            }
            other => {
                return Err(Error::InvalidMaze(format!(
                    "line {}: unknown directive '{other}'",
                    lineno + 1
                )));
            }
        }
    }

    let missing = |what: &str| Error::InvalidMaze(format!("missing '{what}' directive"));
    MazeSpec::new(
        name,
        walls,
        start.ok_or_else(|| missing("start"))?,
        goal.ok_or_else(|| missing("goal"))?,
        threshold.expect("threshold set with goal"),
        horizon.ok_or_else(|| missing("horizon"))?,
        bounds.ok_or_else(|| missing("bounds"))?,
    )
}

pub(crate) fn maze_to_text(spec: &MazeSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "bounds {} {} {} {}\n",
        spec.bounds.min.x, spec.bounds.min.y, spec.bounds.max.x, spec.bounds.max.y
    ));
    out.push_str(&format!("start {} {}\n", spec.start.x, spec.start.y));
    out.push_str(&format!(
        "goal {} {} {}\n",
        spec.goal.x, spec.goal.y, spec.goal_threshold
    ));
    out.push_str(&format!("horizon {}\n", spec.horizon));
    for w in &spec.walls {
        out.push_str(&format!("wall {} {} {} {}\n", w.a.x, w.a.y, w.b.x, w.b.y));
    }
    out
}
