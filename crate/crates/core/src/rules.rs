//! Commonsense goal-graph construction.
//!
//! Unknown categories are obstacles and never enter the graph. Among the
//! remaining objects, plate > bowl > cup act as anchors; cutlery and other
//! objects each receive exactly one outgoing edge toward an anchor.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::Box3;
use crate::graph::{Edge, ObjectId, RelationLabel, SceneGraph};
use crate::scene::{ObjectInstance, SceneState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Anchor,
    Cutlery,
    Other,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryVocabulary {
    roles: BTreeMap<String, Role>,
}

impl Default for CategoryVocabulary {
    fn default() -> Self {
        let mut roles = BTreeMap::new();
        for c in ["plate", "bowl", "cup"] {
            roles.insert(c.to_string(), Role::Anchor);
        }
        for c in ["fork", "knife", "spoon"] {
            roles.insert(c.to_string(), Role::Cutlery);
        }
        for c in ["bottle", "can", "box", "teapot"] {
            roles.insert(c.to_string(), Role::Other);
        }
        Self { roles }
    }
}

fn normalize(label: &str) -> String {
    label.trim().to_ascii_lowercase()
}

impl CategoryVocabulary {
    pub fn role(&self, label: &str) -> Role {
        self.roles
            .get(&normalize(label))
            .copied()
            .unwrap_or(Role::Obstacle)
    }

    pub fn is_obstacle(&self, label: &str) -> bool {
        self.role(label) == Role::Obstacle
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, Role)> {
        self.roles.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Priority of a category when picking the layout anchor: plate, bowl, cup.
pub fn anchor_rank(label: &str) -> Option<usize> {
    match normalize(label).as_str() {
        "plate" => Some(0),
        "bowl" => Some(1),
        "cup" => Some(2),
        _ => None,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("no placeable objects: every input is an obstacle")]
    NoPlaceableObjects,
}

/// Returns a copy of `scene` with obstacle flags set from the vocabulary.
pub fn mark_obstacles(scene: &SceneState, vocab: &CategoryVocabulary) -> SceneState {
    let mut out = scene.clone();
    for o in out.objects_mut() {
        o.is_obstacle = o.is_obstacle || vocab.is_obstacle(&o.category);
    }
    out
}

fn footprint(b: &Box3) -> f64 {
    b.footprint_area()
}

/// Builds the goal graph for a set of observed objects.
///
/// Objects flagged as obstacles, or whose category is outside the
/// vocabulary, are dropped. Ties between same-category objects resolve by
/// ascending id.
pub fn build_commonsense_graph(
    objects: &[ObjectInstance],
    vocab: &CategoryVocabulary,
) -> Result<SceneGraph, RuleError> {
    let mut placeable: Vec<&ObjectInstance> = objects
        .iter()
        .filter(|o| !o.is_obstacle && !vocab.is_obstacle(&o.category))
        .collect();
    if placeable.is_empty() {
        return Err(RuleError::NoPlaceableObjects);
    }
    placeable.sort_by_key(|o| o.id);

    let first_of = |cat: &str| -> Option<ObjectId> {
        placeable
            .iter()
            .find(|o| normalize(&o.category) == cat)
            .map(|o| o.id)
    };
    let plate = first_of("plate");
    let bowl = first_of("bowl");
    let cup = first_of("cup");

    // highest-priority anchor; without any anchor category, the object
    // with the largest footprint takes the role
    let primary = plate.or(bowl).or(cup).unwrap_or_else(|| {
        placeable
            .iter()
            .fold(None::<&ObjectInstance>, |best, o| match best {
                Some(b) if footprint(&b.bbox) >= footprint(&o.bbox) => Some(b),
                _ => Some(o),
            })
            .expect("placeable is non-empty")
            .id
    });

    let mut graph = SceneGraph::default();
    for o in &placeable {
        graph
            .add_node(o.id, normalize(&o.category))
            .expect("ids are unique within a scene");
    }

    use RelationLabel::*;
    for o in &placeable {
        if o.id == primary {
            continue;
        }
        let category = normalize(&o.category);
        let edge = match category.as_str() {
            "fork" => Edge::new(o.id, plate.unwrap_or(primary), Left),
            "knife" => Edge::new(o.id, plate.unwrap_or(primary), Right),
            "spoon" => match plate {
                Some(p) => Edge::new(o.id, p, Front),
                None => Edge::new(o.id, bowl.or(cup).unwrap_or(primary), CloseBy),
            },
            "plate" => Edge::new(o.id, primary, CloseBy),
            "bowl" => Edge::new(o.id, plate.unwrap_or(primary), CloseBy),
            "cup" => Edge::new(o.id, plate.or(bowl).unwrap_or(primary), CloseBy),
            _ => Edge::new(o.id, primary, Front),
        };
        graph.add_edge(edge).expect("rule edges are valid");
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PointCloud, Vec3};
    use RelationLabel::*;

    fn obj(id: ObjectId, category: &str, size: f64) -> ObjectInstance {
        let x = id as f64 * 0.3;
        ObjectInstance::from_cloud(
            id,
            category,
            PointCloud::table(vec![
                Vec3::new(x, 0.0, 0.0),
                Vec3::new(x + size, 0.0, 0.0),
                Vec3::new(x, size, 0.01),
                Vec3::new(x + size, size, 0.02),
            ]),
        )
        .unwrap()
    }

    fn edges(g: &SceneGraph) -> Vec<Edge> {
        let mut e = g.edges().to_vec();
        e.sort();
        e
    }

    #[test]
    fn plate_fork_knife() {
        let g = build_commonsense_graph(
            &[
                obj(1, "plate", 0.2),
                obj(2, "fork", 0.05),
                obj(3, "knife", 0.05),
            ],
            &CategoryVocabulary::default(),
        )
        .unwrap();
        assert_eq!(
            edges(&g),
            vec![Edge::new(2, 1, Left), Edge::new(3, 1, Right)]
        );
    }

    #[test]
    fn spoon_by_bowl() {
        let g = build_commonsense_graph(
            &[obj(1, "bowl", 0.1), obj(2, "spoon", 0.05)],
            &CategoryVocabulary::default(),
        )
        .unwrap();
        assert_eq!(edges(&g), vec![Edge::new(2, 1, CloseBy)]);
    }

    #[test]
    fn spoon_by_cup_without_bowl() {
        let g = build_commonsense_graph(
            &[obj(4, "cup", 0.1), obj(2, "spoon", 0.05)],
            &CategoryVocabulary::default(),
        )
        .unwrap();
        assert_eq!(edges(&g), vec![Edge::new(2, 4, CloseBy)]);
    }

    #[test]
    fn unknown_category_is_dropped() {
        let g = build_commonsense_graph(
            &[obj(1, "plate", 0.2), obj(2, "hammer", 0.1)],
            &CategoryVocabulary::default(),
        )
        .unwrap();
        assert_eq!(g.nodes().len(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn all_obstacles() {
        assert_eq!(
            build_commonsense_graph(&[obj(1, "hammer", 0.1)], &CategoryVocabulary::default()),
            Err(RuleError::NoPlaceableObjects)
        );
    }

    #[test]
    fn full_table() {
        let objects = [
            obj(1, "bottle", 0.07),
            obj(2, "plate", 0.24),
            obj(3, "spoon", 0.04),
            obj(4, "bowl", 0.15),
            obj(5, "cup", 0.08),
            obj(6, "fork", 0.03),
            obj(7, "fork", 0.03),
        ];
        let g = build_commonsense_graph(&objects, &CategoryVocabulary::default()).unwrap();
        assert_eq!(
            edges(&g),
            vec![
                Edge::new(1, 2, Front),
                Edge::new(3, 2, Front),
                Edge::new(4, 2, CloseBy),
                Edge::new(5, 2, CloseBy),
                Edge::new(6, 2, Left),
                Edge::new(7, 2, Left),
            ]
        );
        // each non-anchor node has exactly one outgoing edge
        for n in g.nodes() {
            let out = g.outgoing(n.id).count();
            assert_eq!(out, usize::from(n.id != 2));
        }
    }

    #[test]
    fn cup_by_bowl_without_plate() {
        let g = build_commonsense_graph(
            &[
                obj(1, "cup", 0.08),
                obj(2, "bowl", 0.15),
                obj(3, "can", 0.06),
            ],
            &CategoryVocabulary::default(),
        )
        .unwrap();
        assert_eq!(
            edges(&g),
            vec![Edge::new(1, 2, CloseBy), Edge::new(3, 2, Front)]
        );
    }

    #[test]
    fn largest_footprint_anchors_when_no_anchor_category() {
        let g = build_commonsense_graph(
            &[
                obj(1, "can", 0.06),
                obj(2, "box", 0.12),
                obj(3, "knife", 0.03),
            ],
            &CategoryVocabulary::default(),
        )
        .unwrap();
        assert_eq!(
            edges(&g),
            vec![Edge::new(1, 2, Front), Edge::new(3, 2, Right)]
        );
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut objects = vec![
            obj(5, "knife", 0.03),
            obj(1, "plate", 0.2),
            obj(3, "spoon", 0.04),
            obj(2, "fork", 0.03),
        ];
        let a = build_commonsense_graph(&objects, &CategoryVocabulary::default()).unwrap();
        objects.reverse();
        let b = build_commonsense_graph(&objects, &CategoryVocabulary::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vocabulary_roles() {
        let v = CategoryVocabulary::default();
        assert_eq!(v.role("Plate "), Role::Anchor);
        assert_eq!(v.role("spoon"), Role::Cutlery);
        assert_eq!(v.role("teapot"), Role::Other);
        assert_eq!(v.role("hammer"), Role::Obstacle);
    }
}
