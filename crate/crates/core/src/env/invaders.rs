//! `mini_invaders`: clear a descending alien grid.
//!
//! A 9x7 grid. A 3x5 alien formation bounces horizontally and descends on a
//! fixed cadence; the player moves along the bottom row behind three shield
//! cells and fires a single rising bullet. +1 per alien destroyed. The
//! episode ends when the player is hit, the formation reaches the player
//! row, all aliens are cleared, or the frame limit lapses.
//!
//! Frame order: player bullet advances and resolves, alien bullets advance
//! and resolve, formation moves, player acts, aliens fire, bookkeeping.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::env::{EnvError, EnvSpec, Environment, Flavour, Game, Observation, StepResult};
use crate::rng::Rng;

/// Dynamics parameters of one invaders flavour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvadersSpec {
    pub flavour: Flavour,
    pub width: usize,
    pub height: usize,
    pub frame_limit: u64,
    pub alien_rows: usize,
    pub alien_cols: usize,
    /// Formation descends one row every this many frames.
    pub descend_interval: u64,
    /// Formation moves one column sideways every this many frames.
    pub move_interval: u64,
    /// Per-frame fire probability of each living alien column.
    pub alien_fire_prob: f64,
    pub shield_row: usize,
    pub shield_cols: Vec<usize>,
    /// Mode 1: shields slide through a fixed offset cycle of this length.
    pub shield_oscillation: Option<u64>,
    /// Difficulty 1 widens the player sprite to 2 cells.
    pub player_width: usize,
    /// Mode 9: the alien channel renders only during a brief flash after a hit.
    pub hidden_aliens: bool,
    pub flash_frames: u32,
    pub start_col: usize,
}

/// Shield offset cycle for the oscillating mode (period 6).
const SHIELD_CYCLE: [i32; 6] = [0, 1, 1, 0, -1, -1];

impl InvadersSpec {
    pub fn for_flavour(flavour: Flavour) -> InvadersSpec {
        debug_assert_eq!(flavour.game, Game::MiniInvaders);
        InvadersSpec {
            flavour,
            width: 9,
            height: 7,
            frame_limit: 500,
            alien_rows: 3,
            alien_cols: 5,
            descend_interval: 20,
            move_interval: 2,
            alien_fire_prob: 0.02,
            shield_row: 5,
            shield_cols: vec![1, 4, 7],
            shield_oscillation: (flavour.mode == 1).then_some(SHIELD_CYCLE.len() as u64),
            player_width: if flavour.difficulty == 1 { 2 } else { 1 },
            hidden_aliens: flavour.mode == 9,
            flash_frames: 3,
            start_col: 4,
        }
    }

    pub fn player_row(&self) -> usize {
        self.height - 1
    }

    /// Shield columns at frame `t`.
    pub fn shields_at(&self, t: u64) -> Vec<usize> {
        let offset = match self.shield_oscillation {
            Some(period) => SHIELD_CYCLE[(t % period) as usize],
            None => 0,
        };
        self.shield_cols
            .iter()
            .map(|c| ((*c as i32 + offset).rem_euclid(self.width as i32)) as usize)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MiniInvaders {
    spec: InvadersSpec,
    anchor_row: i32,
    anchor_col: i32,
    dir: i32,
    alive: Vec<Vec<bool>>,
    player_col: usize,
    player_bullet: Option<(i32, usize)>,
    alien_bullets: Vec<(i32, usize)>,
    flash: u32,
    t: u64,
    terminal: bool,
    rng: Rng,
}

impl MiniInvaders {
    pub fn new(spec: InvadersSpec, rng: Rng) -> Self {
        let alive = vec![vec![true; spec.alien_cols]; spec.alien_rows];
        MiniInvaders {
            anchor_row: 0,
            anchor_col: 2,
            dir: 1,
            alive,
            player_col: spec.start_col,
            player_bullet: None,
            alien_bullets: Vec::new(),
            flash: 0,
            t: 0,
            terminal: false,
            rng,
            spec,
        }
    }

    pub fn invaders_spec(&self) -> &InvadersSpec {
        &self.spec
    }

    pub fn aliens_left(&self) -> usize {
        self.alive.iter().flatten().filter(|a| **a).count()
    }

    fn alien_at(&self, row: i32, col: i32) -> Option<(usize, usize)> {
        let i = row - self.anchor_row;
        let j = col - self.anchor_col;
        if (0..self.spec.alien_rows as i32).contains(&i)
            && (0..self.spec.alien_cols as i32).contains(&j)
            && self.alive[i as usize][j as usize]
        {
            Some((i as usize, j as usize))
        } else {
            None
        }
    }

    fn player_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.player_col..(self.player_col + self.spec.player_width).min(self.spec.width)
    }

    /// Resolves the player bullet at its current cell; returns reward earned.
    fn resolve_player_bullet(&mut self, shields: &[usize]) -> f64 {
        let Some((row, col)) = self.player_bullet else {
            return 0.0;
        };
        if row < 0 {
            self.player_bullet = None;
            return 0.0;
        }
        if row as usize == self.spec.shield_row && shields.contains(&col) {
            self.player_bullet = None;
            return 0.0;
        }
        if let Some((i, j)) = self.alien_at(row, col as i32) {
            self.alive[i][j] = false;
            self.player_bullet = None;
            self.flash = self.spec.flash_frames;
            return 1.0;
        }
        0.0
    }

    fn observation(&self) -> Observation {
        let mut obs = Observation::zeros(3, self.spec.height, self.spec.width);
        for col in self.player_cells() {
            obs.set(0, self.spec.player_row(), col);
        }
        if !self.spec.hidden_aliens || self.flash > 0 {
            for (i, row) in self.alive.iter().enumerate() {
                for (j, alive) in row.iter().enumerate() {
                    if !alive {
                        continue;
                    }
                    let y = self.anchor_row + i as i32;
                    let x = self.anchor_col + j as i32;
                    if (0..self.spec.height as i32).contains(&y)
                        && (0..self.spec.width as i32).contains(&x)
                    {
                        obs.set(1, y as usize, x as usize);
                    }
                }
            }
        }
        for col in self.spec.shields_at(self.t) {
            obs.set(2, self.spec.shield_row, col);
        }
        if let Some((row, col)) = self.player_bullet {
            if (0..self.spec.height as i32).contains(&row) {
                obs.set(2, row as usize, col);
            }
        }
        for (row, col) in &self.alien_bullets {
            if (0..self.spec.height as i32).contains(row) {
                obs.set(2, *row as usize, *col);
            }
        }
        obs
    }
}

impl Environment for MiniInvaders {
    fn spec(&self) -> EnvSpec {
        EnvSpec::Invaders(self.spec.clone())
    }

    fn observation_shape(&self) -> (usize, usize, usize) {
        (3, self.spec.height, self.spec.width)
    }

    fn action_count(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Observation {
        self.anchor_row = 0;
        self.anchor_col = 2;
        self.dir = 1;
        self.alive = vec![vec![true; self.spec.alien_cols]; self.spec.alien_rows];
        self.player_col = self.spec.start_col;
        self.player_bullet = None;
        self.alien_bullets = Vec::new();
        self.flash = 0;
        self.t = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        if action >= 4 {
            return Err(EnvError::InvalidAction { action, count: 4 });
        }
        let t0 = self.t;
        let shields = self.spec.shields_at(t0);
        let player_row = self.spec.player_row() as i32;
        let mut reward = 0.0;
        let mut player_hit = false;

        // 1. Player bullet rises one cell and resolves.
        if let Some((row, _)) = &mut self.player_bullet {
            *row -= 1;
        }
        reward += self.resolve_player_bullet(&shields);

        // 2. Alien bullets fall one cell and resolve.
        let mut kept = Vec::with_capacity(self.alien_bullets.len());
        for (row, col) in std::mem::take(&mut self.alien_bullets) {
            let row = row + 1;
            if row as usize == self.spec.shield_row && shields.contains(&col) {
                continue;
            }
            if row == player_row {
                if self.player_cells().any(|c| c == col) {
                    player_hit = true;
                }
                continue;
            }
            if row < self.spec.height as i32 {
                kept.push((row, col));
            }
        }
        self.alien_bullets = kept;

        // 3. Formation movement: descend on its cadence, otherwise slide and
        //    bounce off the walls. A formation reaching the player row ends
        //    the episode.
        if t0 > 0 && t0 % self.spec.descend_interval == 0 {
            self.anchor_row += 1;
        } else if t0 % self.spec.move_interval == 0 {
            let span = self.spec.alien_cols as i32;
            let mut next = self.anchor_col + self.dir;
            if next < 0 || next + span > self.spec.width as i32 {
                self.dir = -self.dir;
                next = self.anchor_col + self.dir;
            }
            self.anchor_col = next;
        }
        let lowest_living = self
            .alive
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|a| *a))
            .map(|(i, _)| self.anchor_row + i as i32)
            .max();
        if lowest_living.is_some_and(|r| r >= player_row) {
            player_hit = true;
        }
        // An alien may have moved onto the bullet's cell.
        reward += self.resolve_player_bullet(&shields);

        // 4. Player acts.
        match action {
            1 => self.player_col = self.player_col.saturating_sub(1),
            2 => {
                self.player_col = (self.player_col + 1).min(self.spec.width - self.spec.player_width)
            }
            3 => {
                if self.player_bullet.is_none() {
                    self.player_bullet = Some((player_row, self.player_col));
                }
            }
            _ => {}
        }

        // 5. Each living column fires from its bottom alien with fixed
        //    probability, columns left to right.
        for j in 0..self.spec.alien_cols {
            let bottom = (0..self.spec.alien_rows).rev().find(|i| self.alive[*i][j]);
            let Some(bottom) = bottom else { continue };
            if self.rng.bernoulli(self.spec.alien_fire_prob) {
                let row = self.anchor_row + bottom as i32 + 1;
                let col = ((self.anchor_col + j as i32).rem_euclid(self.spec.width as i32)) as usize;
                if row as usize == self.spec.shield_row && shields.contains(&col) {
                    continue;
                }
                if row == player_row && self.player_cells().any(|c| c == col) {
                    player_hit = true;
                    continue;
                }
                if row < self.spec.height as i32 {
                    self.alien_bullets.push((row, col));
                }
            }
        }

        // 6. Bookkeeping.
        self.t += 1;
        self.terminal =
            player_hit || self.aliens_left() == 0 || self.t >= self.spec.frame_limit;
        let result = StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        };
        self.flash = self.flash.saturating_sub(1);
        Ok(result)
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn state_fingerprint(&self) -> u64 {
        // Flash timer excluded: it only affects rendering.
        let mut h = DefaultHasher::new();
        self.anchor_row.hash(&mut h);
        self.anchor_col.hash(&mut h);
        self.dir.hash(&mut h);
        self.alive.hash(&mut h);
        self.player_col.hash(&mut h);
        self.player_bullet.hash(&mut h);
        self.alien_bullets.hash(&mut h);
        self.t.hash(&mut h);
        self.terminal.hash(&mut h);
        h.finish()
    }
}
