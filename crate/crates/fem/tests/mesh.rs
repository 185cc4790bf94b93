use electropann_fem::{ElementOrder, FemError, Mesh};

#[test]
fn box_mesh_counts_and_sets() {
    let m = Mesh::box_mesh(ElementOrder::Q2, [8, 2, 1], [8.0, 2.0, 1.0]).unwrap();
    assert_eq!(m.nodes.len(), 17 * 5 * 3);
    assert_eq!(m.elements.len(), 16);
    assert_eq!(m.node_set("xmin").unwrap().len(), 5 * 3);
    assert_eq!(m.face_set("zmax").unwrap().len(), 16);
    assert_eq!(m.face_set("xmax").unwrap().len(), 2);
    let q1 = Mesh::box_mesh(ElementOrder::Q1, [2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
    assert_eq!(q1.nodes.len(), 12);
    assert!(Mesh::box_mesh(ElementOrder::Q1, [0, 1, 1], [1.0; 3]).is_err());
}

#[test]
fn face_nodes_lie_on_the_face() {
    let m = Mesh::box_mesh(ElementOrder::Q2, [1, 1, 1], [1.0, 2.0, 3.0]).unwrap();
    for face in 0..6 {
        let axis = face / 2;
        let target = if face % 2 == 0 { 0.0 } else { [1.0, 2.0, 3.0][axis] };
        let local = m.face_local_nodes(face);
        assert_eq!(local.len(), 9);
        for a in local {
            assert_eq!(m.nodes[m.elements[0][a]][axis], target);
        }
    }
}

#[test]
fn text_round_trip_is_exact() {
    let mut m = Mesh::box_mesh(ElementOrder::Q1, [2, 2, 1], [1.0, 0.7, 0.3]).unwrap();
    m.add_node_set_where("corner", |x| x[0] == 0.0 && x[1] == 0.0);
    let back = Mesh::from_text(&m.to_text()).unwrap();
    assert_eq!(back, m);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mesh");
    m.save(&path).unwrap();
    assert_eq!(Mesh::load(&path).unwrap(), m);
}

#[test]
fn arbitrary_ids_are_renumbered() {
    let text = "\
order Q1
nodes 8
10 0 0 0
11 1 0 0
12 0 1 0
13 1 1 0
14 0 0 1
15 1 0 1
16 0 1 1
17 1 1 1
elements 1
7 10 11 12 13 14 15 16 17
nodeset top 4
14 15 16 17
faceset top 1
7:5
";
    let m = Mesh::from_text(text).unwrap();
    assert_eq!(m.elements[0], (0..8).collect::<Vec<_>>());
    assert_eq!(m.node_set("top").unwrap(), &[4, 5, 6, 7]);
    assert_eq!(m.face_set("top").unwrap(), &[(0, 5)]);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let bad = "order Q1\nnodes 1\n0 0 0\n";
    match Mesh::from_text(bad) {
        Err(FemError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(Mesh::from_text("order Q3\n"), Err(FemError::Parse { line: 1, .. })));
    assert!(matches!(Mesh::from_text("nodes 0\n"), Err(FemError::Parse { .. })));
    let unknown = "order Q1\nnodes 0\nelements 1\n0 1 2 3 4 5 6 7 8\n";
    assert!(matches!(Mesh::from_text(unknown), Err(FemError::Parse { line: 4, .. })));
}

#[test]
fn inverted_element_is_rejected() {
    let m = Mesh::box_mesh(ElementOrder::Q1, [1, 1, 1], [1.0; 3]).unwrap();
    let flipped = m.transformed(|x| [x[0], x[1], -x[2]]);
    assert!(matches!(flipped.validate(), Err(FemError::Mesh(_))));
}
