"""Rewrites a current-schema OpenCV Haar cascade in the legacy haartraining schema.

usage: to_legacy.py IN.xml OUT.xml [--stages N]
"""
import sys
import xml.etree.ElementTree as ET


def main():
    src, dst = sys.argv[1], sys.argv[2]
    limit = int(sys.argv[4]) if len(sys.argv) > 4 and sys.argv[3] == "--stages" else None
    root = ET.parse(src).getroot().find("cascade")
    feats = [
        ([r.text.split() for r in f.find("rects").findall("_")],
         (f.findtext("tilted") or "0").strip())
        for f in root.find("features").findall("_")
    ]
    text = open(src).read()
    # keep the original license notice
    notice = text[text.find("<!--"): text.find("-->") + 3] if "<!--" in text else ""
    out = ['<?xml version="1.0"?>', notice, "<opencv_storage>",
           '<cascade_legacy type_id="opencv-haar-classifier">',
           "  <size>%s %s</size>" % (root.findtext("width").strip(), root.findtext("height").strip()),
           "  <stages>"]
    stages = root.find("stages").findall("_")
    for si, stage in enumerate(stages[:limit]):
        out.append("    <_>")
        out.append("      <!-- stage %d -->" % si)
        out.append("      <trees>")
        for weak in stage.find("weakClassifiers").findall("_"):
            nodes = weak.findtext("internalNodes").split()
            leaves = weak.findtext("leafValues").split()
            out.append("        <_>")
            # one legacy node per internal node; multi-node trees are emitted as-is
            for n in range(len(nodes) // 4):
                left, right, idx, thr = nodes[4 * n: 4 * n + 4]
                rects, tilted = feats[int(idx)]
                out.append("          <_>")
                out.append("            <feature>")
                out.append("              <rects>")
                for r in rects:
                    out.append("                <_>%s</_>" % " ".join(r))
                out.append("              </rects>")
                out.append("              <tilted>%s</tilted></feature>" % tilted)
                out.append("            <threshold>%s</threshold>" % thr)
                if int(left) <= 0:
                    out.append("            <left_val>%s</left_val>" % leaves[-int(left)])
                else:
                    out.append("            <left_node>%s</left_node>" % left)
                if int(right) <= 0:
                    out.append("            <right_val>%s</right_val>" % leaves[-int(right)])
                else:
                    out.append("            <right_node>%s</right_node>" % right)
                out.append("          </_>")
            out.append("        </_>")
        out.append("      </trees>")
        out.append("      <stage_threshold>%s</stage_threshold>" % stage.findtext("stageThreshold").strip())
        out.append("      <parent>%d</parent>" % (si - 1))
        out.append("      <next>-1</next></_>")
    out += ["  </stages>", "</cascade_legacy>", "</opencv_storage>", ""]
    open(dst, "w").write("\n".join(out))


if __name__ == "__main__":
    main()
