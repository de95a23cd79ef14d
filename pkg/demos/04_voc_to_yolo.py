"""Pascal-VOC XML in, YOLO label lines out."""
from wlsr import parse_voc, to_yolo

xml = """<annotation>
  <filename>f.png</filename>
  <size><width>640</width><height>480</height><depth>3</depth></size>
  <object><name>polyp</name>
    <bndbox><xmin>200</xmin><ymin>120</ymin><xmax>360</xmax><ymax>280</ymax></bndbox>
  </object>
</annotation>"""

for ann in parse_voc(xml):
    print(ann.box, "->", to_yolo(ann))

# same file, read as 1-based inclusive coordinates
for ann in parse_voc(xml, one_based=True):
    print("one-based:", ann.box, "->", to_yolo(ann))
