"""Standard performance scripts used by tests, the CLI, and experiments."""

from __future__ import annotations

from .bus import NetConfig
from .orchestrator import Cue, LocConfig, MarkerSpec, PerformanceScript, SwarmSpec


def bandwidth_profile_script(duration: float = 300.0,
                             transfer_bytes: int = 1_000_000) -> PerformanceScript:
    """The 13-node roster: 5 human-scale + 5 aerial + 1 marker + 2 stations.

    The timed cues walk through the full command vocabulary: two launches
    (with their software-upload spikes), one behavior switch, one stop.
    """
    return PerformanceScript(
        name="bandwidth_profile",
        duration=duration,
        swarms=(
            SwarmSpec("ground", "human_scale", 5, (1.0, 1.0, 5.0, 5.0),
                      program="ring_chase"),
            SwarmSpec("air", "aerial", 5, (1.0, 7.0, 5.0, 11.0),
                      program="orbit", altitude=1.2),
        ),
        marker=MarkerSpec(start=(3.0, 6.0), path="circle", radius=1.5, period=90.0),
        ground_stations=2,
        cues=(
            Cue(at=duration * 0.1, kind="launch", swarm="ground"),
            Cue(at=duration * 0.3, kind="launch", swarm="air"),
            Cue(at=duration * 0.5, kind="switch", program="gather"),
            Cue(at=duration * 0.8, kind="stop"),
        ),
        net=NetConfig(latency_mean_ms=10.0, latency_jitter_ms=5.0,
                      loss_prob=0.0, gossip_period_ms=250.0),
        transfer_bytes=transfer_bytes,
    )


def pursuit_script(duration: float = 30.0, n_aerial: int = 5) -> PerformanceScript:
    """Five aerial robots flying a cyclic pursuit: the UWB-vs-truth scenario."""
    return PerformanceScript(
        name="pursuit_uwb",
        duration=duration,
        swarms=(
            SwarmSpec("air", "aerial", n_aerial, (1.5, 4.0, 4.5, 8.0),
                      program="ring_chase", altitude=1.2),
        ),
        ground_stations=1,
        autostart=True,
        net=NetConfig(latency_mean_ms=10.0, latency_jitter_ms=5.0, loss_prob=0.0),
    )


def gossip_only_script(n_robots: int, duration: float = 30.0) -> PerformanceScript:
    """N active robots doing nothing but gossiping, for load-scaling runs."""
    return PerformanceScript(
        name=f"gossip_only_{n_robots}",
        duration=duration,
        swarms=(
            SwarmSpec("ground", "human_scale", n_robots,
                      (0.5, 0.5, 5.5, 11.5), program="freeze"),
        ),
        ground_stations=0,
        autostart=True,
        net=NetConfig(latency_mean_ms=5.0, latency_jitter_ms=2.0, loss_prob=0.0),
    )


def mixed_firework_script(duration: float = 20.0,
                          program: str = "firework") -> PerformanceScript:
    """All three robot classes running the identical program in one run."""
    return PerformanceScript(
        name="mixed_firework",
        duration=duration,
        swarms=(
            SwarmSpec("tables", "tabletop", 3, (2.0, 2.0, 4.0, 4.0), program=program),
            SwarmSpec("air", "aerial", 3, (1.5, 6.5, 4.5, 9.5), program=program,
                      altitude=1.0),
            SwarmSpec("ground", "human_scale", 3, (1.0, 4.5, 5.0, 7.5),
                      program=program),
        ),
        marker=MarkerSpec(start=(3.0, 6.0), path="static"),
        ground_stations=1,
        autostart=True,
        net=NetConfig(latency_mean_ms=10.0, latency_jitter_ms=5.0, loss_prob=0.0),
    )


def console_demo_script(duration: float = 600.0) -> PerformanceScript:
    """Manual-cue session for the operator console: nothing happens until
    the operator launches; small upload blobs keep activation snappy."""
    return PerformanceScript(
        name="console_demo",
        duration=duration,
        swarms=(
            SwarmSpec("ground", "human_scale", 3, (1.0, 1.5, 5.0, 5.0),
                      program="gather"),
            SwarmSpec("air", "aerial", 3, (1.5, 7.0, 4.5, 10.5),
                      program="orbit", altitude=1.2),
        ),
        marker=MarkerSpec(start=(3.0, 6.0), path="static"),
        ground_stations=1,
        transfer_bytes=50_000,
        net=NetConfig(latency_mean_ms=10.0, latency_jitter_ms=5.0, loss_prob=0.0),
    )


STANDARD_SCENARIOS = {
    "bandwidth_profile": bandwidth_profile_script,
    "pursuit_uwb": pursuit_script,
    "mixed_firework": mixed_firework_script,
    "console_demo": console_demo_script,
}
