use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::tree::{Node, Tree};

/// Prunes `tree` at `prune_threshold` and renders the remaining topology as a
/// DOT digraph. Internal nodes are boxes, leaves ellipses; every node is
/// labeled with its depth and leafness.
pub fn render_dot(tree: &Tree, prune_threshold: f64) -> Result<String> {
    let pruned = tree.prune_hard(prune_threshold)?;
    let mut out = String::from("digraph tree {\n  node [fontname=\"Helvetica\"];\n");
    let mut next_id = 0usize;
    emit(pruned.root(), 0, &mut next_id, &mut out);
    out.push_str("}\n");
    Ok(out)
}

fn emit(node: &Node, depth: usize, next_id: &mut usize, out: &mut String) -> usize {
    let id = *next_id;
    *next_id += 1;
    let shape = if node.is_leaf() { "ellipse" } else { "box" };
    writeln!(
        out,
        "  n{id} [label=\"depth {depth}\\nγ={:.3}\", shape={shape}];",
        node.leafness()
    )
    .expect("writing to a String");
    if let Some((l, r)) = node.children() {
        for (child, side) in [(l, "L"), (r, "R")] {
            let cid = emit(child, depth + 1, next_id, out);
            writeln!(out, "  n{id} -> n{cid} [label=\"{side}\"];").expect("writing to a String");
        }
    }
    id
}

pub fn export_dot<W: Write>(tree: &Tree, prune_threshold: f64, mut sink: W) -> Result<()> {
    let text = render_dot(tree, prune_threshold)?;
    sink.write_all(text.as_bytes())?;
    sink.flush()?;
    Ok(())
}
