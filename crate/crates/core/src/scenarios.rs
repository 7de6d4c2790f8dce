//! Named scenarios: a task, the scripted demonstration style of simulated
//! teachers, and the priors their parameters are drawn from.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Circle, Point, Rect};
use crate::task::{MazeTask, PickPlaceTask, Task, TestSet};
use crate::teachers::{
    CountPrior, DemoScript, MazeScript, PickPlaceScript, RealPrior, TeacherConfig, TeacherVariant,
};

pub const MAZE: &str = "maze";
pub const PICK_PLACE: &str = "pick_place";

/// Priors shared by every simulated teacher of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherPriors {
    pub optimism_radius: RealPrior,
    pub naive_plan: CountPrior,
}

impl Default for TeacherPriors {
    fn default() -> Self {
        TeacherPriors {
            optimism_radius: RealPrior::Uniform {
                min: 0.02,
                max: 0.12,
            },
            naive_plan: CountPrior::Uniform { min: 6, max: 14 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub task: Task,
    pub script: DemoScript,
    #[serde(default)]
    pub teacher_priors: TeacherPriors,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig(
                "scenario name must be nonempty".into(),
            ));
        }
        self.script.validate(&self.task)?;
        self.teacher_config(TeacherVariant::Naive).validate()
    }

    pub fn test_set(&self) -> TestSet {
        self.task.default_test_set()
    }

    pub fn teacher_config(&self, variant: TeacherVariant) -> TeacherConfig {
        let mut c = TeacherConfig::new(variant);
        c.optimism_radius = self.teacher_priors.optimism_radius;
        c.naive_plan = self.teacher_priors.naive_plan;
        c
    }
}

/// A 20 cm x 30 cm maze: start in the bottom 6 cm, two walls forming an S
/// corridor, a 2.5 mm target near the top.
pub fn maze() -> Scenario {
    let rect = |a, b, c, d| Rect::new(a, b, c, d).expect("valid rectangle");
    let task = MazeTask::new(
        rect(0.0, 0.0, 0.2, 0.3),
        rect(0.0, 0.0, 0.2, 0.06),
        Circle {
            center: Point::xy(0.15, 0.27),
            radius: 0.0025,
        },
        alloc::vec![rect(0.0, 0.10, 0.12, 0.14), rect(0.08, 0.19, 0.2, 0.23)],
    )
    .expect("valid maze");
    let script = MazeScript {
        waypoints: alloc::vec![
            Point::xy(0.16, 0.08),
            Point::xy(0.16, 0.165),
            Point::xy(0.04, 0.165),
            Point::xy(0.04, 0.25)
        ],
        noise_sigma: 0.002,
        samples_per_leg: 20,
        smoothing: 3,
        dt: 0.05,
    };
    Scenario {
        name: MAZE.to_string(),
        description: "Maze with a 20 x 7 grid of start positions".to_string(),
        task: Task::Maze(task),
        script: DemoScript::Maze(script),
        teacher_priors: TeacherPriors::default(),
    }
}

/// A 10 x 10 tray of targets at 4 cm pitch, a bin beside it, and a fixed
/// start pose above the workspace.
pub fn pick_place() -> Scenario {
    let targets: Vec<Point> = (0..10)
        .flat_map(|r| {
            (0..10).map(move |c| Point::xyz(0.4 + 0.04 * c as f64, -0.2 + 0.04 * r as f64, 0.05))
        })
        .collect();
    let task = PickPlaceTask::new(
        Aabb::new([0.0, -0.6, 0.0], [1.0, 0.6, 0.6]).expect("valid box"),
        targets,
        (10, 10),
        Point::xyz(0.6, 0.4, 0.1),
        Point::xyz(0.3, -0.3, 0.3),
        0.02,
        0.03,
    )
    .expect("valid pick-and-place task");
    let script = PickPlaceScript {
        clearance: 0.1,
        noise_sigma: 0.003,
        samples_per_leg: 12,
        dwell_samples: 24,
        dt: 0.05,
    };
    Scenario {
        name: PICK_PLACE.to_string(),
        description: "Pick-and-place from a 10 x 10 tray into a bin".to_string(),
        task: Task::PickPlace(task),
        script: DemoScript::PickPlace(script),
        teacher_priors: TeacherPriors::default(),
    }
}

pub fn shipped() -> Vec<Scenario> {
    alloc::vec![maze(), pick_place()]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    shipped().into_iter().find(|s| s.name == name)
}
