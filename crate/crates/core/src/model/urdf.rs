//! URDF subset reader/writer.
//!
//! Supported: `robot`, `link` (with `collision` and `visual`/mesh), `joint`
//! of type `revolute` or `fixed`, `origin xyz/rpy`, `axis`, `limit`.
//! Extensions: `<capsule radius length/>` collision geometry (z-aligned,
//! `length` between cap centres), `<camera>` and `<end_effector>` elements
//! directly under `robot`. `inertial`, `material` and `dynamics` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::{Joint, JointKind, Link, Primitive, RobotModel};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::pose::Pose;
use crate::vision::CameraModel;

pub fn parse_robot_description(text: &str) -> Result<RobotModel> {
    let doc = Document::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(Error::Parse(format!(
            "expected <robot> root element, found <{}>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();
    let mut links = Vec::new();
    let mut joints = Vec::new();
    let mut cameras = Vec::new();
    let mut end_effectors = BTreeMap::new();
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => links.push(parse_link(node)?),
            "joint" => joints.push(parse_joint(node)?),
            "camera" => cameras.push(parse_camera(node)?),
            "end_effector" => {
                end_effectors.insert(attr(node, "name")?.to_string(), attr(node, "link")?.to_string());
            }
            "material" | "gazebo" => {}
            other => return Err(Error::Parse(format!("unsupported element <{other}>"))),
        }
    }
    RobotModel::new(name, links, joints, cameras, end_effectors)
}

fn attr<'a>(node: Node<'a, '_>, key: &str) -> Result<&'a str> {
    node.attribute(key).ok_or_else(|| {
        Error::Parse(format!(
            "<{}> is missing attribute `{key}` (line {})",
            node.tag_name().name(),
            node.document().text_pos_at(node.range().start).row
        ))
    })
}

fn floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{t}` in {what}"))))
        .collect::<Result<_>>()?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse(format!("{what} needs {n} finite numbers, got `{s}`")));
    }
    Ok(v)
}

fn float_attr(node: Node, key: &str) -> Result<f64> {
    Ok(floats(attr(node, key)?, 1, key)?[0])
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn parse_origin(node: Node) -> Result<Pose> {
    let Some(o) = child(node, "origin") else {
        return Ok(Pose::identity());
    };
    let xyz = o.attribute("xyz").map(|s| floats(s, 3, "origin xyz")).transpose()?;
    let rpy = o.attribute("rpy").map(|s| floats(s, 3, "origin rpy")).transpose()?;
    let xyz = xyz.unwrap_or_else(|| vec![0.0; 3]);
    let rpy = rpy.unwrap_or_else(|| vec![0.0; 3]);
    Ok(Pose::from_xyz_rpy([xyz[0], xyz[1], xyz[2]], [rpy[0], rpy[1], rpy[2]]))
}

fn parse_link(node: Node) -> Result<Link> {
    let name = attr(node, "name")?.to_string();
    let mut collision = Vec::new();
    let mut visual_mesh = None;
    for c in node.children().filter(Node::is_element) {
        match c.tag_name().name() {
            "collision" => {
                let origin = parse_origin(c)?;
                let geom = child(c, "geometry")
                    .and_then(|g| g.children().find(Node::is_element))
                    .ok_or_else(|| Error::Parse(format!("collision of `{name}` has no geometry")))?;
                let shape = match geom.tag_name().name() {
                    "sphere" => Shape::Sphere {
                        radius: float_attr(geom, "radius")?,
                    },
                    "capsule" => Shape::Capsule {
                        radius: float_attr(geom, "radius")?,
                        half_length: 0.5 * float_attr(geom, "length")?,
                    },
                    "box" => {
                        let s = floats(attr(geom, "size")?, 3, "box size")?;
                        Shape::Box {
                            half_extents: Vector3::new(s[0], s[1], s[2]) * 0.5,
                        }
                    }
                    other => {
                        return Err(Error::Parse(format!(
                            "unsupported collision geometry <{other}> in `{name}`"
                        )))
                    }
                };
                collision.push(Primitive { shape, origin });
            }
            "visual" => {
                if let Some(mesh) = child(c, "geometry").and_then(|g| child(g, "mesh")) {
                    visual_mesh = Some(PathBuf::from(attr(mesh, "filename")?));
                }
            }
            "inertial" => {}
            other => return Err(Error::Parse(format!("unsupported element <{other}> in link `{name}`"))),
        }
    }
    Ok(Link {
        name,
        collision,
        visual_mesh,
    })
}

fn parse_joint(node: Node) -> Result<Joint> {
    let name = attr(node, "name")?.to_string();
    let kind = match attr(node, "type")? {
        "revolute" => JointKind::Revolute,
        "fixed" => JointKind::Fixed,
        other => return Err(Error::Parse(format!("joint `{name}` has unsupported type `{other}`"))),
    };
    let parent = child(node, "parent")
        .ok_or_else(|| Error::Parse(format!("joint `{name}` has no <parent>")))
        .and_then(|p| attr(p, "link"))?
        .to_string();
    let child_link = child(node, "child")
        .ok_or_else(|| Error::Parse(format!("joint `{name}` has no <child>")))
        .and_then(|p| attr(p, "link"))?
        .to_string();
    let origin = parse_origin(node)?;
    let axis = match child(node, "axis") {
        Some(a) => {
            let v = floats(attr(a, "xyz")?, 3, "axis")?;
            let v = Vector3::new(v[0], v[1], v[2]);
            let n = v.norm();
            if n == 0.0 {
                return Err(Error::Validation(format!("joint `{name}` has a zero axis")));
            }
            v / n
        }
        None => Vector3::x(),
    };
    let (limit_lo, limit_hi, max_velocity) = match (kind, child(node, "limit")) {
        (JointKind::Fixed, _) => (0.0, 0.0, 1.0),
        (JointKind::Revolute, Some(l)) => (
            float_attr(l, "lower")?,
            float_attr(l, "upper")?,
            float_attr(l, "velocity")?,
        ),
        (JointKind::Revolute, None) => {
            return Err(Error::Parse(format!("revolute joint `{name}` needs a <limit>")))
        }
    };
    Ok(Joint {
        name,
        kind,
        parent,
        child: child_link,
        origin,
        axis,
        limit_lo,
        limit_hi,
        max_velocity,
    })
}

fn parse_camera(node: Node) -> Result<CameraModel> {
    let width = attr(node, "width")?
        .parse::<u32>()
        .map_err(|_| Error::Parse("camera width must be an integer".into()))?;
    let height = attr(node, "height")?
        .parse::<u32>()
        .map_err(|_| Error::Parse("camera height must be an integer".into()))?;
    Ok(CameraModel {
        name: attr(node, "name")?.to_string(),
        link: attr(node, "link")?.to_string(),
        pose: parse_origin(node)?,
        width,
        height,
        focal_length: float_attr(node, "focal_length")?,
    })
}

fn origin_xml(p: &Pose) -> String {
    let (r, pi, y) = p.orientation.euler_angles();
    format!(
        "<origin xyz=\"{} {} {}\" rpy=\"{} {} {}\"/>",
        p.position.x, p.position.y, p.position.z, r, pi, y
    )
}

/// Write a model back out in the same URDF subset.
pub fn serialize_robot_description(model: &RobotModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\"?>");
    let _ = writeln!(s, "<robot name=\"{}\">", model.name);
    for l in &model.links {
        let _ = writeln!(s, "  <link name=\"{}\">", l.name);
        for p in &l.collision {
            let geom = match p.shape {
                Shape::Sphere { radius } => format!("<sphere radius=\"{radius}\"/>"),
                Shape::Capsule {
                    radius,
                    half_length,
                } => format!("<capsule radius=\"{radius}\" length=\"{}\"/>", 2.0 * half_length),
                Shape::Box { half_extents: h } => {
                    format!("<box size=\"{} {} {}\"/>", 2.0 * h.x, 2.0 * h.y, 2.0 * h.z)
                }
            };
            let _ = writeln!(
                s,
                "    <collision>{}<geometry>{geom}</geometry></collision>",
                origin_xml(&p.origin)
            );
        }
        if let Some(m) = &l.visual_mesh {
            let _ = writeln!(
                s,
                "    <visual><geometry><mesh filename=\"{}\"/></geometry></visual>",
                m.display()
            );
        }
        let _ = writeln!(s, "  </link>");
    }
    for j in &model.joints {
        let kind = match j.kind {
            JointKind::Revolute => "revolute",
            JointKind::Fixed => "fixed",
        };
        let _ = writeln!(s, "  <joint name=\"{}\" type=\"{kind}\">", j.name);
        let _ = writeln!(s, "    <parent link=\"{}\"/><child link=\"{}\"/>", j.parent, j.child);
        let _ = writeln!(s, "    {}", origin_xml(&j.origin));
        if j.kind == JointKind::Revolute {
            let _ = writeln!(s, "    <axis xyz=\"{} {} {}\"/>", j.axis.x, j.axis.y, j.axis.z);
            let _ = writeln!(
                s,
                "    <limit lower=\"{}\" upper=\"{}\" velocity=\"{}\"/>",
                j.limit_lo, j.limit_hi, j.max_velocity
            );
        }
        let _ = writeln!(s, "  </joint>");
    }
    for c in &model.cameras {
        let _ = writeln!(
            s,
            "  <camera name=\"{}\" link=\"{}\" width=\"{}\" height=\"{}\" focal_length=\"{}\">{}</camera>",
            c.name,
            c.link,
            c.width,
            c.height,
            c.focal_length,
            origin_xml(&c.pose)
        );
    }
    for (name, link) in &model.end_effectors {
        let _ = writeln!(s, "  <end_effector name=\"{name}\" link=\"{link}\"/>");
    }
    let _ = writeln!(s, "</robot>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn single_link_no_joints() {
        let m = parse_robot_description(r#"<robot name="r"><link name="base"/></robot>"#).unwrap();
        assert_eq!(m.links.len(), 1);
        assert_eq!(m.joints.len(), 0);
        assert_eq!(m.dof(), 0);
    }

    #[test]
    fn dangling_parent_is_validation_error() {
        let text = r#"<robot name="r"><link name="b"/>
            <joint name="j" type="revolute"><parent link="ghost"/><child link="b"/>
            <axis xyz="0 0 1"/><limit lower="-1" upper="1" velocity="1"/></joint></robot>"#;
        assert!(matches!(parse_robot_description(text), Err(Error::Validation(_))));
    }

    #[test]
    fn zero_axis_is_validation_error() {
        let text = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
            <axis xyz="0 0 0"/><limit lower="-1" upper="1" velocity="1"/></joint></robot>"#;
        assert!(matches!(parse_robot_description(text), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_text_is_parse_error() {
        assert!(matches!(parse_robot_description("<robot><link"), Err(Error::Parse(_))));
        let prismatic = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="prismatic"><parent link="a"/><child link="b"/></joint></robot>"#;
        assert!(matches!(parse_robot_description(prismatic), Err(Error::Parse(_))));
    }

    #[test]
    fn reads_geometry_and_extensions() {
        let text = r#"<robot name="r">
          <link name="a">
            <collision><origin xyz="0 0 0.1"/><geometry><capsule radius="0.02" length="0.2"/></geometry></collision>
            <collision><geometry><box size="0.2 0.4 0.6"/></geometry></collision>
            <visual><geometry><mesh filename="a.obj"/></geometry></visual>
          </link>
          <link name="b"/>
          <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
            <origin xyz="1 0 0" rpy="0 0 1.5707963267948966"/>
            <axis xyz="0 0 2"/><limit lower="-1" upper="1" velocity="2"/></joint>
          <camera name="eye" link="b" width="16" height="12" focal_length="13">
            <origin rpy="-1.5707963267948966 0 -1.5707963267948966"/></camera>
          <end_effector name="tip" link="b"/>
        </robot>"#;
        let m = parse_robot_description(text).unwrap();
        assert_eq!(
            m.links[0].collision[0].shape,
            Shape::Capsule {
                radius: 0.02,
                half_length: 0.1
            }
        );
        assert_eq!(
            m.links[0].collision[1].shape,
            Shape::Box {
                half_extents: Vector3::new(0.1, 0.2, 0.3)
            }
        );
        assert_eq!(m.joints[0].axis, Vector3::z());
        assert!((m.joints[0].origin.orientation.angle() - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(m.cameras[0].width, 16);
        assert_eq!(m.end_effector_link("tip").unwrap(), 1);
    }
}
