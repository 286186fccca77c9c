//! Haar cascade model types and the XML loader.
//!
//! Two schemas are accepted. The legacy haartraining layout nests each stump
//! under `<stages>/<_>/<trees>/<_>/<_>` with `<feature>`, `<threshold>`,
//! `<left_val>` and `<right_val>`. The current OpenCV layout stores stumps as
//! `<internalNodes>`/`<leafValues>` pairs referencing a shared `<features>` list.
//! Element order inside a node is not significant for either.

use roxmltree::{Document, Node};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakClassifier {
    pub rects: Vec<WeightedRect>,
    pub threshold: f64,
    pub left_value: f64,
    pub right_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub weak_classifiers: Vec<WeakClassifier>,
    pub stage_threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cascade {
    pub window_width: u32,
    pub window_height: u32,
    pub stages: Vec<Stage>,
}

impl Cascade {
    /// Builds a cascade after checking every structural invariant.
    pub fn new(window_width: u32, window_height: u32, stages: Vec<Stage>) -> Result<Self> {
        let cascade = Cascade {
            window_width,
            window_height,
            stages,
        };
        cascade.validate().map_err(|message| Error::Parse { line: 0, message })?;
        Ok(cascade)
    }

    pub fn classifier_count(&self) -> usize {
        self.stages.iter().map(|s| s.weak_classifiers.len()).sum()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.window_width < 4 || self.window_height < 4 {
            return Err(format!(
                "window {}x{} is smaller than 4x4",
                self.window_width, self.window_height
            ));
        }
        if self.stages.is_empty() {
            return Err("cascade has no stages".into());
        }
        for (si, stage) in self.stages.iter().enumerate() {
            if stage.weak_classifiers.is_empty() {
                return Err(format!("stage {si} has no weak classifiers"));
            }
            for weak in &stage.weak_classifiers {
                check_feature(&weak.rects, self.window_width, self.window_height)?;
            }
        }
        Ok(())
    }
}

fn check_feature(rects: &[WeightedRect], win_w: u32, win_h: u32) -> std::result::Result<(), String> {
    if rects.is_empty() || rects.len() > 3 {
        return Err(format!("feature has {} rects, expected 1 to 3", rects.len()));
    }
    for r in rects {
        if r.w == 0 || r.h == 0 {
            return Err(format!("empty rect {}x{}", r.w, r.h));
        }
        if r.x + r.w > win_w || r.y + r.h > win_h {
            return Err(format!(
                "rect ({}, {}, {}, {}) leaves the {win_w}x{win_h} window",
                r.x, r.y, r.w, r.h
            ));
        }
    }
    if rects.len() > 1 && rects.iter().filter(|r| r.weight < 0.0).count() != 1 {
        return Err("multi-rect feature must have exactly one negative-weight rect".into());
    }
    Ok(())
}

/// Parses a Haar cascade in either XML schema.
pub fn parse_cascade_xml(text: &str) -> Result<Cascade> {
    let doc = Document::parse(text).map_err(|e| Error::Parse {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc
        .descendants()
        .find(|n| n.is_element() && child(*n, "stages").is_some())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "no element containing <stages> found".into(),
        })?;
    let p = Parser { doc: &doc };
    let cascade = if child(root, "size").is_some() {
        p.legacy(root)?
    } else {
        p.current(root)?
    };
    cascade.validate().map_err(|message| Error::Parse {
        line: p.line(root),
        message,
    })?;
    Ok(cascade)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn items<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.has_tag_name("_"))
}

struct Parser<'d, 'i> {
    doc: &'d Document<'i>,
}

impl<'d, 'i> Parser<'d, 'i> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn err(&self, node: Node, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line(node),
            message: message.into(),
        }
    }

    fn req<'a>(&self, node: Node<'a, 'i>, name: &str) -> Result<Node<'a, 'i>> {
        child(node, name).ok_or_else(|| {
            let tag = node.tag_name().name();
            self.err(node, format!("<{tag}> is missing <{name}>"))
        })
    }

    fn numbers(&self, node: Node) -> Result<Vec<f64>> {
        let text: String = node
            .descendants()
            .filter(|n| n.is_text())
            .filter_map(|n| n.text())
            .collect::<Vec<_>>()
            .join(" ");
        text.split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| self.err(node, format!("invalid number `{tok}`")))
            })
            .collect()
    }

    fn number(&self, node: Node, name: &str) -> Result<f64> {
        let n = self.req(node, name)?;
        match self.numbers(n)?.as_slice() {
            [v] => Ok(*v),
            other => Err(self.err(n, format!("<{name}> holds {} values", other.len()))),
        }
    }

    fn count(&self, node: Node, v: f64, what: &str) -> Result<u32> {
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(self.err(node, format!("{what} must be a non-negative integer, got {v}")));
        }
        Ok(v as u32)
    }

    fn feature(&self, feature: Node) -> Result<Vec<WeightedRect>> {
        if let Some(t) = child(feature, "tilted") {
            if self.numbers(t)?.iter().any(|&v| v != 0.0) {
                return Err(Error::UnsupportedFeature(format!(
                    "tilted feature at line {}",
                    self.line(t)
                )));
            }
        }
        let rects = self.req(feature, "rects")?;
        let mut out = Vec::new();
        for r in items(rects) {
            let vals = self.numbers(r)?;
            let &[x, y, w, h, weight] = vals.as_slice() else {
                return Err(self.err(r, format!("rect holds {} values, expected 5", vals.len())));
            };
            out.push(WeightedRect {
                x: self.count(r, x, "rect x")?,
                y: self.count(r, y, "rect y")?,
                w: self.count(r, w, "rect width")?,
                h: self.count(r, h, "rect height")?,
                weight,
            });
        }
        Ok(out)
    }

    fn legacy(&self, root: Node) -> Result<Cascade> {
        let size_node = self.req(root, "size")?;
        let size = self.numbers(size_node)?;
        let &[w, h] = size.as_slice() else {
            return Err(self.err(size_node, "<size> must hold width and height"));
        };
        let mut stages = Vec::new();
        for stage in items(self.req(root, "stages")?) {
            let mut weak_classifiers = Vec::new();
            for tree in items(self.req(stage, "trees")?) {
                let nodes: Vec<_> = items(tree).collect();
                let [node] = nodes.as_slice() else {
                    return Err(Error::UnsupportedFeature(format!(
                        "tree with {} nodes at line {} (only stumps are supported)",
                        nodes.len(),
                        self.line(tree)
                    )));
                };
                if child(*node, "left_node").is_some() || child(*node, "right_node").is_some() {
                    return Err(Error::UnsupportedFeature(format!(
                        "non-stump tree at line {}",
                        self.line(*node)
                    )));
                }
                weak_classifiers.push(WeakClassifier {
                    rects: self.feature(self.req(*node, "feature")?)?,
                    threshold: self.number(*node, "threshold")?,
                    left_value: self.number(*node, "left_val")?,
                    right_value: self.number(*node, "right_val")?,
                });
            }
            stages.push(Stage {
                weak_classifiers,
                stage_threshold: self.number(stage, "stage_threshold")?,
            });
        }
        Ok(Cascade {
            window_width: self.count(size_node, w, "window width")?,
            window_height: self.count(size_node, h, "window height")?,
            stages,
        })
    }

    fn current(&self, root: Node) -> Result<Cascade> {
        if let Some(ft) = child(root, "featureType") {
            let kind = ft.text().unwrap_or("").trim();
            if !kind.eq_ignore_ascii_case("HAAR") {
                return Err(Error::UnsupportedFeature(format!("feature type {kind}")));
            }
        }
        let w = self.number(root, "width")?;
        let h = self.number(root, "height")?;
        let features = items(self.req(root, "features")?)
            .map(|f| self.feature(f))
            .collect::<Result<Vec<_>>>()?;

        let mut stages = Vec::new();
        for stage in items(self.req(root, "stages")?) {
            let mut weak_classifiers = Vec::new();
            for weak in items(self.req(stage, "weakClassifiers")?) {
                let nodes_el = self.req(weak, "internalNodes")?;
                let nodes = self.numbers(nodes_el)?;
                let leaves = self.numbers(self.req(weak, "leafValues")?)?;
                let (&[left, right, idx, threshold], &[left_value, right_value]) =
                    (nodes.as_slice(), leaves.as_slice())
                else {
                    return Err(Error::UnsupportedFeature(format!(
                        "weak classifier with {} node values at line {} (only stumps are supported)",
                        nodes.len(),
                        self.line(nodes_el)
                    )));
                };
                if left != 0.0 || right != -1.0 {
                    return Err(Error::UnsupportedFeature(format!(
                        "non-stump tree at line {}",
                        self.line(nodes_el)
                    )));
                }
                let idx = self.count(nodes_el, idx, "feature index")? as usize;
                let rects = features.get(idx).cloned().ok_or_else(|| {
                    self.err(nodes_el, format!("feature index {idx} out of range"))
                })?;
                weak_classifiers.push(WeakClassifier {
                    rects,
                    threshold,
                    left_value,
                    right_value,
                });
            }
            stages.push(Stage {
                weak_classifiers,
                stage_threshold: self.number(stage, "stageThreshold")?,
            });
        }
        Ok(Cascade {
            window_width: self.count(root, w, "window width")?,
            window_height: self.count(root, h, "window height")?,
            stages,
        })
    }
}
