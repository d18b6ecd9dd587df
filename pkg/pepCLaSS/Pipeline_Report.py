# -*- coding: utf-8 -*-

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~IMPORTS~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~#

# Standard library imports
import os
from collections import OrderedDict, Counter

# Third party imports
import numpy as np
import pandas as pd
import jinja2

# Plotly imports
import plotly.graph_objs as go
from plotly.subplots import make_subplots
import plotly.offline as py

# Local imports
from pepCLaSS.common import *
from pepCLaSS.config import init_command
from pepCLaSS.corpus import LabeledCorpus
from pepCLaSS.analysis.descriptors import descriptors_table

# ~~~~~~~~~~~~~~~~~~~~~~~~Main Function~~~~~~~~~~~~~~~~~~~~~~~~#

PLOTTED_DESCRIPTORS = ["charge", "hydrophobicity_H", "hydrophobic_moment_uH", "aromaticity"]


class Pipeline_Reporter:
    def __init__(
        self,
        candidates_fn: str,
        screen_dir: str,
        outdir: str = "./",
        novelty_fn: str = None,
        corpus_fn: str = None,
        n_top: int = 20,
        rank_by: str = "amp_score",
        c_terminal_amidated: bool = True,
        log=None,
        prov=None,
        **kwargs,
    ):
        self.candidates_fn = candidates_fn
        self.screen_dir = screen_dir
        self.outdir = outdir
        self.novelty_fn = novelty_fn
        self.corpus_fn = corpus_fn
        self.n_top = n_top
        self.rank_by = rank_by
        self.c_terminal_amidated = c_terminal_amidated
        self.log = log
        self.prov = prov
        self.counter = Counter()

        # Constants
        self.summary_report_fn = "pepCLaSS_summary_report.html"
        self.report_json_fn = "report.json"
        self.top_candidates_fn = "top_candidates.tsv"
        self.verdicts_fn = os.path.join(screen_dir, "verdicts.csv")
        self.screen_report_fn = os.path.join(screen_dir, "screen_report.json")

        for fn, label in [(candidates_fn, "Candidates file"), (self.verdicts_fn, "Verdicts file"), (self.screen_report_fn, "Screening report")]:
            check_readable(fn, label)
        if novelty_fn:
            check_readable(novelty_fn, "Novelty file")

    def check_provenance(self):
        """All the input artifacts must come from the same config file"""
        hashes = OrderedDict()
        for fn in (self.candidates_fn, self.verdicts_fn, self.screen_report_fn, self.novelty_fn):
            if not fn:
                continue
            prov = read_provenance(fn)
            if prov and prov.get("config_hash"):
                hashes[fn] = prov["config_hash"]
        if len(set(hashes.values())) > 1:
            raise ConfigError("Input artifacts carry different config hashes: {}".format(", ".join("{}={}".format(k, v) for k, v in hashes.items())))
        return next(iter(hashes.values()), None)

    def funnel(self, screen_report):
        """Candidate counts from the sampler down to the last screening stage"""
        steps = OrderedDict()
        sidecar = self.candidates_fn + ".json"
        if file_readable(sidecar):
            with open(sidecar) as fp:
                stats = json.load(fp)
            for key in ("Accepted latent points", "Latent samples", "Unique candidates"):
                if key in stats:
                    steps[key] = stats[key]
        inp = screen_report["input"]
        steps.setdefault("Unique candidates", inp["candidates"])
        steps["Screened (novel)"] = inp["candidates"] - inp["not_novel_excluded"]
        for stage, d in screen_report.items():
            if stage != "input":
                steps["Passed {}".format(stage)] = d["passed"]
        return steps

    def top_candidates(self, verdicts):
        """Survivors ranked by score, with descriptors and the best training match when available"""
        df = verdicts[verdicts["passed"] == 1].copy()
        rank_by = self.rank_by if self.rank_by in df.columns else "accept_prob"
        if rank_by != self.rank_by:
            self.log.info("No `{}` column in the verdicts, ranking by accept_prob".format(self.rank_by))
        df = df.sort_values([rank_by, "id"], ascending=[False, True]).head(self.n_top)
        df.insert(0, "rank", np.arange(1, len(df) + 1))
        if df.empty:
            return df

        desc = descriptors_table(df["sequence"], df["id"], c_terminal_amidated=self.c_terminal_amidated)
        df = df.merge(desc.drop(columns=["sequence"]), on="id", how="left")
        if self.novelty_fn:
            novelty = pd.read_csv(self.novelty_fn, dtype={"id": str}, comment="#")
            novelty = novelty[["id", "best_match", "score", "identity_pct", "coverage_pct"]].rename(columns={"score": "alignment_score"})
            df = df.merge(novelty, on="id", how="left")
        return df

    def descriptor_sets(self, verdicts):
        """Descriptor tables of the sequence sets compared in the distribution plots"""
        sets = OrderedDict()
        survivors = verdicts[verdicts["passed"] == 1]
        if not verdicts.empty:
            sets["Screened"] = descriptors_table(verdicts["sequence"], c_terminal_amidated=self.c_terminal_amidated)
        if not survivors.empty:
            sets["Survivors"] = descriptors_table(survivors["sequence"], c_terminal_amidated=self.c_terminal_amidated)
        if self.corpus_fn:
            corpus = LabeledCorpus.load(self.corpus_fn)
            amp = [e.sequence for e in corpus.split("train") if e.labels.get("AMP") == 1]
            if amp:
                sets["Training AMP"] = descriptors_table(amp, c_terminal_amidated=self.c_terminal_amidated)
        return sets

    def __call__(self):
        self.log.warning("Checking input provenance")
        config_hash = self.check_provenance()

        self.log.warning("Loading screening results")
        with open(self.screen_report_fn) as fp:
            screen = json.load(fp)
        verdicts = pd.read_csv(self.verdicts_fn, dtype={"id": str, "sequence": str}, keep_default_na=False, na_values=[""], comment="#")
        self.counter["Screened candidates"] = len(verdicts)
        self.counter["Survivors"] = int((verdicts["passed"] == 1).sum()) if len(verdicts) else 0

        steps = self.funnel(screen["report"])
        counts = list(steps.values())
        if any(b > a for a, b in zip(counts, counts[1:])):
            self.log.error("Funnel counts increase between steps: {}".format(list(steps.items())))
        log_dict(steps, self.log.info, "Attrition funnel")

        self.log.warning("Ranking top candidates")
        top_df = self.top_candidates(verdicts)
        self.counter["Top candidates"] = len(top_df)

        self.log.warning("Writing reports")
        mkdir(self.outdir, exist_ok=True)
        with open(os.path.join(self.outdir, self.top_candidates_fn), "w") as fp:
            fp.write(provenance_line(self.prov))
            top_df.to_csv(fp, sep="\t", index=False, float_format="%.6f")

        d = OrderedDict()
        d["input_config_hash"] = config_hash
        d["funnel"] = steps
        d["thresholds"] = screen.get("thresholds")
        d["top_candidates"] = top_df.to_dict(orient="records")
        write_json(os.path.join(self.outdir, self.report_json_fn), d, prov=self.prov)

        self.write_summary_html(
            funnel_fig=funnel_plot(steps),
            steps=steps,
            thresholds=screen.get("thresholds") or {},
            descriptors_fig=descriptor_plot(self.descriptor_sets(verdicts)),
            top_df=top_df,
        )
        return d

    def write_summary_html(self, funnel_fig, steps, thresholds, descriptors_fig, top_df):
        """Write summary HTML report"""
        out_file = os.path.join(self.outdir, self.summary_report_fn)
        template = get_jinja_template("Report_summary.html.j2")

        funnel_table = pd.DataFrame({"step": list(steps.keys()), "count": list(steps.values())})
        thresholds_df = pd.DataFrame({"option": list(thresholds.keys()), "value": [str(v) for v in thresholds.values()]})
        rendering = template.render(
            plotlyjs=py.get_plotlyjs(),
            title_text="pepCLaSS summary report",
            tool_version=self.prov["tool_version"],
            config_hash=self.prov["config_hash"],
            seed=self.prov["seed"],
            candidates_fn=self.candidates_fn,
            screen_dir=self.screen_dir,
            funnel_html=render_fig(funnel_fig, empty_msg="No candidates"),
            funnel_table_html=render_df(funnel_table),
            thresholds_html=render_df(thresholds_df, empty_msg="No thresholds recorded"),
            descriptors_html=render_fig(descriptors_fig, empty_msg="No sequences to plot"),
            top_html=render_df(top_df, empty_msg="No candidate passed the screening"),
        )
        with open(out_file, "w") as fp:
            fp.write(rendering)


def Pipeline_Report(
    candidates_fn: str,
    screen_dir: str,
    outdir: str = "./",
    novelty_fn: str = None,
    corpus_fn: str = None,
    n_top: int = 20,
    rank_by: str = "amp_score",
    c_terminal_amidated: bool = True,
    seed: int = 0,
    config_fn: str = None,
    verbose: bool = False,
    quiet: bool = False,
    progress: bool = False,
    **kwargs,
):
    """
    Collate a generation run into an HTML report: attrition funnel from the latent sampler to the last
    screening stage, descriptor distributions and a dossier of the top ranked survivors. Also writes
    report.json and top_candidates.tsv. Inputs written under different config files are refused
    * candidates_fn
        Candidates FASTA file written by class-sample
    * screen_dir
        Output directory of screen (verdicts.csv and screen_report.json)
    * outdir
        Directory where to output the reports, By default current directory
    * novelty_fn
        Novelty CSV written by align for the screened candidates
    * corpus_fn
        Corpus TSV file, to compare descriptors with the training AMPs
    * n_top
        Number of top candidates in the dossier
    * rank_by
        Verdict column used to rank the survivors
    * c_terminal_amidated
        Compute charges for amidated C-termini
    * seed
        Recorded in the output provenance
    * config_fn
        Pipeline config file
    """
    opt, log, prov = init_command(Pipeline_Report, locals(), "pepCLaSS_Report")
    reporter = Pipeline_Reporter(log=log, prov=prov, **opt)
    try:
        return reporter()
    finally:
        log_dict(reporter.counter, log.info, "Results summary")


# ~~~~~~~~~~~~~~~~~~~~~~~~Plotting functions~~~~~~~~~~~~~~~~~~~~~~~~#


def funnel_plot(steps, color: str = "rgb(87,85,217)", fig_width: int = None, fig_height: int = None):
    """Funnel chart of the candidate counts per step"""
    if not steps:
        return None
    fig = go.Figure(
        go.Funnel(
            y=list(steps.keys()),
            x=list(steps.values()),
            textinfo="value+percent initial",
            marker={"color": color},
            opacity=0.9,
        )
    )
    fig.update_layout(dict1={"plot_bgcolor": "rgba(0,0,0,0)", "width": fig_width, "height": fig_height})
    return fig


def descriptor_plot(sets, columns=PLOTTED_DESCRIPTORS, fig_width: int = None, fig_height: int = 500):
    """Box plots of a few descriptors, one trace per sequence set"""
    if not sets:
        return None
    colors = ["rgb(87,85,217)", "rgb(215,48,39)", "rgb(150,150,150)", "rgb(33,102,172)"]
    fig = make_subplots(rows=1, cols=len(columns), subplot_titles=columns)
    for i, (name, df) in enumerate(sets.items()):
        for j, col in enumerate(columns, 1):
            fig.add_trace(
                go.Box(
                    y=df[col],
                    name=name,
                    legendgroup=name,
                    showlegend=j == 1,
                    marker_color=colors[i % len(colors)],
                    boxmean=True,
                ),
                row=1,
                col=j,
            )
    fig.update_layout(dict1={"plot_bgcolor": "rgba(0,0,0,0)", "width": fig_width, "height": fig_height})
    fig.update_xaxes(showticklabels=False)
    fig.update_yaxes(showgrid=True, gridcolor="lightgrey", zeroline=False)
    return fig


# ~~~~~~~~~~~~~~~~~~~~~~~~Help functions~~~~~~~~~~~~~~~~~~~~~~~~#


def get_jinja_template(template_fn):
    """Load Jinja template"""
    try:
        env = jinja2.Environment(
            loader=jinja2.PackageLoader("pepCLaSS", "templates"), autoescape=jinja2.select_autoescape(["html"])
        )
        return env.get_template(template_fn)
    except (FileNotFoundError, IOError, jinja2.exceptions.TemplateNotFound, jinja2.exceptions.TemplateSyntaxError) as E:
        raise ConfigError("Cannot load report template `{}`: {}".format(template_fn, E))


def render_df(df, empty_msg="No data"):
    """Render_dataframe in HTML"""
    if df.empty:
        return f"<div class='empty'><p class='empty-title h6'>{empty_msg}</p></div>"
    return df.to_html(
        classes=["table", "table-striped", "table-hover", "table-scroll"],
        border=0,
        index=False,
        justify="justify-all",
        float_format=lambda v: "{:.4f}".format(v),
    )


def render_fig(fig, empty_msg="No data"):
    """Render plotly figure in HTML"""
    if not fig:
        return f"<div class='empty'><p class='empty-title h6'>{empty_msg}</p></div>"
    fig.update_layout(margin={"t": 50, "b": 50})
    return py.plot(
        fig,
        output_type="div",
        include_plotlyjs=False,
        image_width="",
        image_height="",
        show_link=False,
        auto_open=False,
    )
