//! Tic-tac-toe minimax suggestion provider: the shipped, exactly solvable
//! instance of the rollout contract. Scores are game-theoretic values from
//! the mover's perspective (+1 win, 0 draw, -1 loss); ranking prefers
//! faster wins, slower losses, then the lower cell index.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::rollout::{Outcome, Suggestion, SuggestionProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    X,
    O,
}

impl Player {
    pub fn other(self) -> Self {
        match self {
            Player::X => Player::O,
            Player::O => Player::X,
        }
    }
}

/// Cells are indexed 0..9, row-major from the top-left.
pub type Board = [Option<Player>; 9];

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TttError {
    #[error("state is terminal; no suggestions")]
    Terminal,
    #[error("illegal board: {0}")]
    IllegalBoard(String),
    #[error("board string must be 9 characters of X, O, or `.`, got `{0}`")]
    BadEncoding(String),
}

pub fn empty_board() -> Board {
    [None; 9]
}

pub fn parse_board(s: &str) -> Result<Board, TttError> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() != 9 {
        return Err(TttError::BadEncoding(s.to_string()));
    }
    let mut board = empty_board();
    for (i, c) in chars.iter().enumerate() {
        board[i] = match c {
            'X' | 'x' => Some(Player::X),
            'O' | 'o' => Some(Player::O),
            '.' => None,
            _ => return Err(TttError::BadEncoding(s.to_string())),
        };
    }
    validate_board(&board)?;
    Ok(board)
}

pub fn board_to_string(board: &Board) -> String {
    board
        .iter()
        .map(|c| match c {
            Some(Player::X) => 'X',
            Some(Player::O) => 'O',
            None => '.',
        })
        .collect()
}

fn count(board: &Board, p: Player) -> usize {
    board.iter().filter(|&&c| c == Some(p)).count()
}

fn winner(board: &Board) -> Option<Player> {
    for line in &LINES {
        if let Some(p) = board[line[0]] {
            if board[line[1]] == Some(p) && board[line[2]] == Some(p) {
                return Some(p);
            }
        }
    }
    None
}

/// X moves first, so X has either as many or one more stone than O.
pub fn to_move(board: &Board) -> Player {
    if count(board, Player::X) == count(board, Player::O) {
        Player::X
    } else {
        Player::O
    }
}

fn validate_board(board: &Board) -> Result<(), TttError> {
    let x = count(board, Player::X);
    let o = count(board, Player::O);
    if x != o && x != o + 1 {
        return Err(TttError::IllegalBoard(format!("{x} X vs {o} O stones")));
    }
    Ok(())
}

/// Terminal outcome from the perspective of the side to move.
pub fn terminal_outcome(board: &Board) -> Option<Outcome> {
    let mover = to_move(board);
    match winner(board) {
        Some(p) if p == mover => Some(Outcome::Win),
        Some(_) => Some(Outcome::Loss),
        None if board.iter().all(|c| c.is_some()) => Some(Outcome::Draw),
        None => None,
    }
}

/// Minimax value and plies-to-end under optimal play, from the mover's view.
fn search(board: &Board, memo: &mut HashMap<Board, (i8, u8)>) -> (i8, u8) {
    if let Some(outcome) = terminal_outcome(board) {
        let v = match outcome {
            Outcome::Win => 1,
            Outcome::Draw => 0,
            Outcome::Loss => -1,
        };
        return (v, 0);
    }
    if let Some(&cached) = memo.get(board) {
        return cached;
    }
    let mover = to_move(board);
    let mut best: Option<(i8, u8)> = None;
    for cell in 0..9 {
        if board[cell].is_some() {
            continue;
        }
        let mut next = *board;
        next[cell] = Some(mover);
        let (child_value, child_dist) = search(&next, memo);
        let candidate = (-child_value, child_dist + 1);
        best = Some(match best {
            None => candidate,
            Some(current) => {
                if better(candidate, current) {
                    candidate
                } else {
                    current
                }
            }
        });
    }
    let result = best.expect("non-terminal board has moves");
    memo.insert(*board, result);
    result
}

/// Prefers higher value, then faster wins and slower losses.
fn better(a: (i8, u8), b: (i8, u8)) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    match a.0.cmp(&0) {
        std::cmp::Ordering::Greater => a.1 < b.1,
        std::cmp::Ordering::Less => a.1 > b.1,
        std::cmp::Ordering::Equal => false,
    }
}

/// Exact minimax scores for up to `k` moves, best first; ties by value and
/// depth preference fall back to the ascending cell index.
pub fn minimax_suggestions(
    board: &Board,
    k: usize,
    memo: &mut HashMap<Board, (i8, u8)>,
) -> Result<Vec<Suggestion<usize>>, TttError> {
    validate_board(board)?;
    if terminal_outcome(board).is_some() {
        return Err(TttError::Terminal);
    }
    let mover = to_move(board);
    let mut scored: Vec<(usize, (i8, u8))> = Vec::new();
    for cell in 0..9 {
        if board[cell].is_some() {
            continue;
        }
        let mut next = *board;
        next[cell] = Some(mover);
        let (child_value, child_dist) = search(&next, memo);
        scored.push((cell, (-child_value, child_dist + 1)));
    }
    // Stable sort keeps ascending cell order among full ties.
    scored.sort_by(|a, b| {
        if a.1 == b.1 {
            std::cmp::Ordering::Equal
        } else if better(a.1, b.1) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(cell, (value, _))| Suggestion {
            mv: cell,
            score: value as f64,
        })
        .collect())
}

/// Minimax value of a position from the mover's perspective.
pub fn minimax_value(board: &Board, memo: &mut HashMap<Board, (i8, u8)>) -> i8 {
    search(board, memo).0
}

/// The rollout provider backed by exact minimax search. Holds a shared
/// memo table; single-caller (not `Sync`).
#[derive(Default)]
pub struct TicTacToeProvider {
    memo: RefCell<HashMap<Board, (i8, u8)>>,
}

impl fmt::Debug for TicTacToeProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TicTacToeProvider")
    }
}

impl SuggestionProvider for TicTacToeProvider {
    type State = Board;
    type Move = usize;

    fn suggest(&self, state: &Board, k: usize) -> Vec<Suggestion<usize>> {
        let mut memo = self.memo.borrow_mut();
        minimax_suggestions(state, k, &mut memo).unwrap_or_default()
    }

    fn apply(&self, state: &Board, mv: &usize) -> Board {
        let mut next = *state;
        next[*mv] = Some(to_move(state));
        next
    }

    fn is_terminal(&self, state: &Board) -> Option<Outcome> {
        terminal_outcome(state)
    }

    fn encode_state(&self, state: &Board) -> String {
        board_to_string(state)
    }

    fn encode_move(&self, mv: &usize) -> String {
        mv.to_string()
    }
}
