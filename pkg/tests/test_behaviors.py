import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmstage.behaviors import (
    AggregateParams,
    BehaviorPhase,
    BehaviorProgram,
    DiffuseParams,
    FlockParams,
    LennardJonesParams,
    Neighbor,
    NeighborView,
    Primitive,
    PursuitParams,
    RadialParams,
    StillParams,
    aggregate_velocity,
    clamp_for_class,
    diffuse_velocity,
    firework_program,
    flock_velocity,
    lennard_jones_magnitude,
    lj_velocity,
    load_program,
    phase_at,
    program_from_dict,
    program_id_table,
    program_to_dict,
    pursuit_velocity,
    save_program,
    standard_library,
    step_behavior,
)
from swarmstage.errors import InvalidInputError
from swarmstage.kinematics import Pose, VelocityCommand, tabletop_class
from swarmstage.mathutil import hashed_unit_vector


def nb(node_id, rel, vel=(0.0, 0.0), phase=0):
    return Neighbor(node_id, np.array(rel, dtype=float), np.array(vel, dtype=float), phase)


ORIGIN = Pose(0, 0)


class TestAggregate:
    def test_no_attractor_is_zero(self):
        cmd = aggregate_velocity(ORIGIN, NeighborView(), AggregateParams(gain=1))
        assert cmd == VelocityCommand()

    def test_marker_attraction(self):
        view = NeighborView(marker=np.array([2.0, 0.0]))
        cmd = aggregate_velocity(ORIGIN, view, AggregateParams(gain=0.5, stop_radius=0.1))
        assert (cmd.vx, cmd.vy, cmd.vz) == (1.0, 0.0, 0.0)

    def test_at_centroid_is_zero(self):
        view = NeighborView((nb(1, (1, 0)), nb(2, (-1, 0))))
        cmd = aggregate_velocity(ORIGIN, view, AggregateParams(gain=1, stop_radius=0.01))
        assert (cmd.vx, cmd.vy) == (0.0, 0.0)

    def test_stop_radius(self):
        view = NeighborView(marker=np.array([0.05, 0.0]))
        cmd = aggregate_velocity(ORIGIN, view, AggregateParams(gain=1, stop_radius=0.1))
        assert cmd == VelocityCommand()

    def test_speed_cap(self):
        view = NeighborView(marker=np.array([10.0, 0.0]))
        cmd = aggregate_velocity(ORIGIN, view, AggregateParams(gain=1, speed_cap=0.3))
        assert cmd.planar_speed == pytest.approx(0.3)
        assert cmd.vy == 0.0


class TestDiffuse:
    def test_empty_is_zero(self):
        assert diffuse_velocity(ORIGIN, NeighborView(), DiffuseParams()) == VelocityCommand()

    def test_single_neighbor_repulsion(self):
        view = NeighborView((nb(1, (1, 0)),))
        cmd = diffuse_velocity(ORIGIN, view, DiffuseParams(gain=1, radius=2))
        assert (cmd.vx, cmd.vy) == (-1.0, 0.0)

    def test_symmetric_cancellation(self):
        view = NeighborView((nb(1, (1, 0)), nb(2, (-1, 0))))
        cmd = diffuse_velocity(ORIGIN, view, DiffuseParams(gain=1, radius=2))
        assert (cmd.vx, cmd.vy) == (0.0, 0.0)

    def test_zero_distance_neighbor_skipped(self):
        view = NeighborView((nb(1, (0, 0)), nb(2, (1, 0))))
        cmd = diffuse_velocity(ORIGIN, view, DiffuseParams(gain=1, radius=2))
        assert (cmd.vx, cmd.vy) == (-1.0, 0.0)

    def test_out_of_radius_ignored(self):
        view = NeighborView((nb(1, (5, 0)),))
        cmd = diffuse_velocity(ORIGIN, view, DiffuseParams(gain=1, radius=2))
        assert cmd == VelocityCommand()

    @settings(max_examples=100)
    @given(st.lists(
        st.tuples(st.floats(-3, 3), st.floats(-3, 3)).filter(
            lambda p: 1e-3 < math.hypot(*p) <= 2.0
        ),
        min_size=1, max_size=8,
    ))
    def test_outward_dot_vs_weighted_centroid(self, rels):
        # The diffusion field points away from the inverse-square-weighted
        # centroid of in-range neighbors, for every configuration.
        view = NeighborView(tuple(nb(i, r) for i, r in enumerate(rels)))
        cmd = diffuse_velocity(ORIGIN, view, DiffuseParams(gain=1, radius=2))
        w = np.array([1.0 / math.hypot(*r) ** 2 for r in rels])
        centroid = (w[:, None] * np.array(rels)).sum(axis=0) / w.sum()
        outward = -centroid  # self at origin
        assert np.dot([cmd.vx, cmd.vy], outward) >= -1e-12


class TestFlock:
    def test_fixed_point_is_zero(self):
        vel = np.array([0.3, 0.1])
        view = NeighborView((nb(1, (1, 0), vel), nb(2, (-1, 0), vel)))
        cmd = flock_velocity(ORIGIN, vel, view, FlockParams(r_sep=0.5))
        assert math.hypot(cmd.vx, cmd.vy) < 1e-12

    def test_pure_alignment(self):
        view = NeighborView((nb(1, (1, 0), (1, 0)), nb(2, (-1, 0), (1, 0))))
        cmd = flock_velocity(ORIGIN, np.zeros(2), view,
                             FlockParams(w_sep=0, w_ali=1, w_coh=0, r_sep=0.5))
        assert (cmd.vx, cmd.vy) == (1.0, 0.0)

    def test_pure_separation_points_away(self):
        view = NeighborView((nb(1, (0.25, 0)),))
        cmd = flock_velocity(ORIGIN, np.zeros(2), view,
                             FlockParams(w_sep=1, w_ali=0, w_coh=0, r_sep=0.5))
        assert cmd.vx < 0 and cmd.vy == 0

    def test_empty_view(self):
        cmd = flock_velocity(ORIGIN, np.zeros(2), NeighborView(), FlockParams())
        assert cmd == VelocityCommand()


class TestLennardJones:
    def test_equilibrium_zero(self):
        assert lennard_jones_magnitude(1.0, 1.0, 1.0) == 0.0

    def test_close_repulsion(self):
        assert lennard_jones_magnitude(0.5, 1.0, 1.0) == pytest.approx(-24.0)

    def test_far_attraction(self):
        assert lennard_jones_magnitude(2.0, 1.0, 1.0) == pytest.approx(0.09375)

    @given(st.floats(0.05, 50.0))
    def test_sign_structure(self, d):
        w = lennard_jones_magnitude(d, 1.0, 1.0)
        if d < 1.0:
            assert w < 0
        elif d > 1.0:
            assert w > 0

    def test_invalid_distance(self):
        with pytest.raises(InvalidInputError):
            lennard_jones_magnitude(0.0, 1.0, 1.0)
        with pytest.raises(InvalidInputError):
            lennard_jones_magnitude(-1.0, 1.0, 1.0)

    def test_velocity_at_equilibrium(self):
        view = NeighborView((nb(1, (1, 0)),))
        cmd = lj_velocity(ORIGIN, view, LennardJonesParams(eps=1, delta=1))
        assert math.hypot(cmd.vx, cmd.vy) < 1e-15

    def test_velocity_hexagon_cancels(self):
        rels = [(math.cos(a), math.sin(a)) for a in np.linspace(0, 2 * math.pi, 7)[:-1]]
        view = NeighborView(tuple(nb(i, r) for i, r in enumerate(rels)))
        cmd = lj_velocity(ORIGIN, view, LennardJonesParams(eps=1, delta=1))
        assert math.hypot(cmd.vx, cmd.vy) < 1e-12

    def test_velocity_single_far_neighbor(self):
        view = NeighborView((nb(1, (2, 0)),))
        cmd = lj_velocity(ORIGIN, view, LennardJonesParams(eps=1, delta=1))
        assert cmd.vx == pytest.approx(0.09375)
        assert cmd.vy == 0.0


class TestPursuit:
    def test_mutual_pursuit_two_robots(self):
        view = NeighborView((nb(2, (-2, 0)),))
        cmd = pursuit_velocity(1, Pose(1, 0), view, PursuitParams(gain=1))
        assert (cmd.vx, cmd.vy) == (-2.0, 0.0)

    def test_missing_target_is_zero(self):
        # Ring of {1, 2, 3}: node 1 chases 2, whose gossip went stale.
        view = NeighborView((nb(3, (1, 1)),), roster=(1, 2, 3))
        cmd = pursuit_velocity(1, ORIGIN, view, PursuitParams(gain=1))
        assert cmd == VelocityCommand()

    def test_swarm_of_one(self):
        assert pursuit_velocity(1, ORIGIN, NeighborView(), PursuitParams()) == VelocityCommand()

    def test_ring_on_circle_chases_successor(self):
        # Brute-force chord oracle: command dot chord-to-successor > 0.
        n = 5
        angles = [2 * math.pi * k / n for k in range(n)]
        pos = {k: np.array([math.cos(a), math.sin(a)]) for k, a in zip(range(n), angles)}
        for me in range(n):
            view = NeighborView(tuple(
                nb(j, pos[j] - pos[me]) for j in range(n) if j != me
            ))
            cmd = pursuit_velocity(me, Pose(*pos[me]), view, PursuitParams(gain=1))
            chord = pos[(me + 1) % n] - pos[me]
            assert np.dot([cmd.vx, cmd.vy], chord) > 0

    def test_tangential_term(self):
        view = NeighborView((nb(2, (1, 0)),))
        cmd = pursuit_velocity(1, ORIGIN, view, PursuitParams(gain=1, w_tangent=0.5))
        assert cmd.vx == pytest.approx(1.0)
        assert cmd.vy == pytest.approx(0.5)  # 90 deg CCW of (1,0) scaled


class TestFirework:
    def test_program_shape_and_duration(self):
        prog = firework_program()
        assert [p.primitive for p in prog.phases] == [
            Primitive.AGGREGATE, Primitive.STILL, Primitive.RADIAL, Primitive.RADIAL,
        ]
        assert prog.total_duration == pytest.approx(8 + 2 + 3 + 3)

    def test_burst_is_radial_at_v_out(self):
        prog = firework_program()
        view = NeighborView(marker=np.array([1.0, 1.0]))
        t_burst = 8 + 2 + 0.5
        step = step_behavior(prog, t_burst, 7, Pose(2.0, 1.0), np.zeros(2), view)
        assert step.phase_index == 2
        assert step.command.vx == pytest.approx(0.8)
        assert step.command.vy == pytest.approx(0.0)

    def test_center_tie_break_deterministic(self):
        prog = firework_program()
        view = NeighborView(marker=np.array([1.0, 1.0]))
        s1 = step_behavior(prog, 11.0, 42, Pose(1.0, 1.0), np.zeros(2), view)
        s2 = step_behavior(prog, 11.0, 42, Pose(1.0, 1.0), np.zeros(2), view)
        assert (s1.command.vx, s1.command.vy) == (s2.command.vx, s2.command.vy)
        expected = 0.8 * hashed_unit_vector(42)
        assert s1.command.vx == pytest.approx(expected[0])
        assert s1.command.vy == pytest.approx(expected[1])

    def test_fade_decays_linearly(self):
        prog = firework_program()
        view = NeighborView(marker=np.array([0.0, 0.0]))
        t0 = 8 + 2 + 3  # fade start
        s_mid = step_behavior(prog, t0 + 1.5, 1, Pose(1.0, 0.0), np.zeros(2), view)
        assert s_mid.phase_index == 3
        assert s_mid.command.vx == pytest.approx(0.4)

    def test_missing_marker_flags_cue_error(self):
        prog = firework_program()
        s = step_behavior(prog, 11.0, 1, Pose(1.0, 0.0), np.zeros(2), NeighborView())
        assert s.command == VelocityCommand()
        assert any(e.startswith("cue_error") for e in s.events)
        s0 = step_behavior(prog, 0.0, 1, Pose(1.0, 0.0), np.zeros(2), NeighborView())
        assert s0.command == VelocityCommand()
        assert any(e.startswith("cue_error") for e in s0.events)


class TestComposition:
    def test_phase_zero_at_start(self):
        prog = standard_library()["breathe"]
        assert phase_at(prog, 0.0)[0] == 0

    def test_prefix_sum_lookup(self):
        prog = BehaviorProgram("two", (
            BehaviorPhase(Primitive.STILL, StillParams(), 2.0),
            BehaviorPhase(Primitive.STILL, StillParams(), 3.0),
        ))
        assert phase_at(prog, 4.5) == (1, pytest.approx(2.5))

    def test_final_phase_holds_without_loop(self):
        prog = BehaviorProgram("two", (
            BehaviorPhase(Primitive.STILL, StillParams(), 2.0),
            BehaviorPhase(Primitive.DIFFUSE, DiffuseParams(), 3.0),
        ))
        idx, _ = phase_at(prog, 99.0)
        assert idx == 1
        view = NeighborView((nb(1, (1, 0)),))
        s = step_behavior(prog, 99.0, 0, ORIGIN, np.zeros(2), view)
        assert s.phase_index == 1
        assert s.command.vx < 0  # diffusion still executing

    def test_loop_wraps(self):
        prog = BehaviorProgram("two", (
            BehaviorPhase(Primitive.STILL, StillParams(), 2.0),
            BehaviorPhase(Primitive.STILL, StillParams(), 3.0),
        ), loop=True)
        assert phase_at(prog, 5.5)[0] == 0
        assert phase_at(prog, 7.5)[0] == 1

    def test_deterministic_outputs(self):
        prog = standard_library()["murmuration"]
        view = NeighborView((nb(1, (1, 0.5), (0.1, 0)), nb(2, (-0.3, 1), (0, 0.2))))
        a = step_behavior(prog, 1.23, 5, Pose(0.1, 0.2), np.array([0.05, 0.0]), view)
        b = step_behavior(prog, 1.23, 5, Pose(0.1, 0.2), np.array([0.05, 0.0]), view)
        assert a == b


class TestLibrary:
    def test_twelve_named_programs(self):
        lib = standard_library()
        assert len(lib) == 12
        assert "firework" in lib and "orbit" in lib
        assert all(name == prog.name for name, prog in lib.items())

    def test_program_id_table_stable(self):
        table = program_id_table()
        assert len(table) == 12
        assert sorted(table.values()) == list(range(12))
        assert table == program_id_table()

    def test_yaml_roundtrip_all_programs(self, tmp_path):
        for name, prog in standard_library().items():
            path = tmp_path / f"{name}.yaml"
            save_program(prog, path)
            assert load_program(path) == prog

    def test_dict_roundtrip(self):
        prog = firework_program()
        assert program_from_dict(program_to_dict(prog)) == prog


def test_clamp_helper_preserves_direction():
    cls = tabletop_class(max_speed=0.5)
    cmd = clamp_for_class(VelocityCommand(3.0, 4.0), cls)
    assert cmd.planar_speed == pytest.approx(0.5)
    assert cmd.vy / cmd.vx == pytest.approx(4.0 / 3.0)
    # Sub-limit commands pass through untouched.
    small = VelocityCommand(0.1, -0.2)
    assert clamp_for_class(small, cls) == small


def test_radial_params_validation():
    with pytest.raises(InvalidInputError):
        RadialParams(-0.1, 0.0)
    with pytest.raises(InvalidInputError):
        BehaviorPhase(Primitive.RADIAL, StillParams(), 1.0)  # wrong params type
