"""fitroom: a desk-scale virtual fitting room.

Preprocessing (parse / agnostic / cloth mask / IUV), an appearance-flow
condition generator, a SPADE image generator with multi-scale LSGAN
training and discriminator rejection, FID/IoU evaluation harnesses, and
an HTTP try-on service.
"""

__version__ = "0.1.0"
