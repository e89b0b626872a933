"""Brute-force PSDS reference used only by the tests.

Loops over every detection/ground-truth pair with plain floats and the
statistics module; shares nothing with ``sedpool.psds`` beyond the Event
record type.
"""
import statistics


def _overlap(a_on, a_off, b_on, b_off):
    return max(0.0, min(a_off, b_off) - max(a_on, b_on))


def oracle_counts(detections, gt_events, classes, params):
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    ct = {(c, k): 0 for c in classes for k in classes if k != c}
    valid = []
    for d in detections:
        length = d.offset - d.onset
        same = 0.0
        for g in gt_events:
            if g.clip_id == d.clip_id and g.label == d.label:
                same += _overlap(d.onset, d.offset, g.onset, g.offset)
        ok = same / length >= params.dtc
        valid.append(ok)
        if ok:
            continue
        fp[d.label] += 1
        if params.cttc is None:
            continue
        for k in classes:
            if k == d.label:
                continue
            other = 0.0
            for g in gt_events:
                if g.clip_id == d.clip_id and g.label == k:
                    other += _overlap(d.onset, d.offset, g.onset, g.offset)
            if other / length >= params.cttc:
                ct[(d.label, k)] += 1
    for g in gt_events:
        covered = 0.0
        for d, ok in zip(detections, valid):
            if ok and d.clip_id == g.clip_id and d.label == g.label:
                covered += _overlap(d.onset, d.offset, g.onset, g.offset)
        if covered / (g.offset - g.onset) >= params.gtc:
            tp[g.label] += 1
    return tp, fp, ct


def oracle_rates(tp, fp, ct, gt_events, durations, classes, params):
    hours = sum(durations.values()) / 3600.0
    out = {}
    for c in classes:
        n = sum(1 for g in gt_events if g.label == c)
        tpr = tp[c] / max(1, n)
        efpr = fp[c] / hours
        if params.alpha_ct > 0 and len(classes) > 1:
            total = 0.0
            for k in classes:
                if k == c:
                    continue
                dur_h = sum(g.offset - g.onset for g in gt_events if g.label == k) / 3600.0
                total += ct[(c, k)] / dur_h if dur_h > 0 else 0.0
            efpr += params.alpha_ct * total / (len(classes) - 1)
        out[c] = (tpr, efpr)
    return out


def oracle_psds(detections_by_threshold, gt_events, durations, classes, params):
    per_class = {c: [] for c in classes}
    for thr in sorted(detections_by_threshold):
        tp, fp, ct = oracle_counts(detections_by_threshold[thr], gt_events, classes, params)
        for c, (tpr, efpr) in oracle_rates(tp, fp, ct, gt_events, durations, classes, params).items():
            per_class[c].append((efpr, tpr))

    def support(c, e):
        best = 0.0
        for efpr, tpr in per_class[c]:
            if efpr <= e and tpr > best:
                best = tpr
        return best

    cuts = {0.0, params.e_max}
    for pts in per_class.values():
        for efpr, _ in pts:
            if efpr < params.e_max:
                cuts.add(efpr)
    cuts = sorted(cuts)
    area = 0.0
    for left, right in zip(cuts[:-1], cuts[1:]):
        values = [support(c, left) for c in classes]
        mu = statistics.fmean(values) - params.alpha_st * statistics.pstdev(values)
        area += max(0.0, mu) * (right - left)
    return area / params.e_max
